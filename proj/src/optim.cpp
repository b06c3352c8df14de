// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#include "llf/optim.h"

#include <cmath>
#include <numbers>

#include "llf/error.h"

namespace llf {

std::string to_string(DecayShape s) { return s == DecayShape::Cosine ? "cosine" : "linear"; }

DecayShape decay_shape_from_string(const std::string& s) {
    if (s == "cosine") return DecayShape::Cosine;
    if (s == "linear") return DecayShape::Linear;
    throw ConfigError("unknown schedule shape '" + s + "' (expected cosine or linear)");
}

void ScheduleConfig::validate() const {
    if (!(peak_lr > 0.0) || !std::isfinite(peak_lr)) throw ConfigError("schedule.peak_lr must be positive");
    if (warmup_steps < 1) throw ConfigError("schedule.warmup_steps must be >= 1");
    if (warmup_steps >= total_steps) throw ConfigError("schedule.warmup_steps must be < schedule.total_steps");
    if (!(min_lr_ratio >= 0.0 && min_lr_ratio <= 1.0)) throw ConfigError("schedule.min_lr_ratio must be in [0, 1]");
}

nlohmann::json ScheduleConfig::to_json() const {
    return {{"peak_lr", peak_lr},
            {"warmup_steps", warmup_steps},
            {"total_steps", total_steps},
            {"min_lr_ratio", min_lr_ratio},
            {"shape", to_string(shape)}};
}

ScheduleConfig ScheduleConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("schedule must be a JSON object");
    ScheduleConfig c;
    for (const auto& [key, val] : j.items()) {
        try {
            if (key == "peak_lr") c.peak_lr = val.get<double>();
            else if (key == "warmup_steps") c.warmup_steps = val.get<std::int64_t>();
            else if (key == "total_steps") c.total_steps = val.get<std::int64_t>();
            else if (key == "min_lr_ratio") c.min_lr_ratio = val.get<double>();
            else if (key == "shape") c.shape = decay_shape_from_string(val.get<std::string>());
            else throw ConfigError("unknown schedule key '" + key + "'");
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("schedule key '" + key + "': " + e.what());
        }
    }
    return c;
}

double lr_at_step(const ScheduleConfig& s, std::int64_t step) {
    if (step < 0) throw ConfigError("negative schedule step");
    if (step < s.warmup_steps) return s.peak_lr * double(step + 1) / double(s.warmup_steps);
    const double floor = s.peak_lr * s.min_lr_ratio;
    if (step >= s.total_steps) return floor;
    const double progress = double(step - s.warmup_steps) / double(s.total_steps - s.warmup_steps);
    const double frac = s.shape == DecayShape::Cosine ? 0.5 * (1.0 + std::cos(std::numbers::pi * progress))
                                                      : 1.0 - progress;
    return floor + (s.peak_lr - floor) * frac;
}

void AdamWConfig::validate() const {
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("optimizer.beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("optimizer.beta2 must be in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("optimizer.eps must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay must be >= 0");
    if (!(grad_clip >= 0.0)) throw ConfigError("optimizer.grad_clip must be >= 0");
}

nlohmann::json AdamWConfig::to_json() const {
    return {{"beta1", beta1}, {"beta2", beta2}, {"eps", eps}, {"weight_decay", weight_decay}, {"grad_clip", grad_clip}};
}

AdamWConfig AdamWConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("optimizer must be a JSON object");
    AdamWConfig c;
    for (const auto& [key, val] : j.items()) {
        try {
            if (key == "beta1") c.beta1 = val.get<double>();
            else if (key == "beta2") c.beta2 = val.get<double>();
            else if (key == "eps") c.eps = val.get<double>();
            else if (key == "weight_decay") c.weight_decay = val.get<double>();
            else if (key == "grad_clip") c.grad_clip = val.get<double>();
            else throw ConfigError("unknown optimizer key '" + key + "'");
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("optimizer key '" + key + "': " + e.what());
        }
    }
    return c;
}

template <typename T>
OptimState<T> OptimState<T>::zeros_for(const TensorMap<T>& params) {
    OptimState<T> s;
    for (const auto& [name, p] : params) {
        s.m.emplace(name, BasicTensor<T>(p.shape()));
        s.v.emplace(name, BasicTensor<T>(p.shape()));
    }
    return s;
}

bool decays(const Shape& shape) { return shape.size() == 2; }

template <typename T>
void adamw_step(TensorMap<T>& params, const GradSet<T>& grads, OptimState<T>& state, double lr,
                const AdamWConfig& cfg) {
    const double t = double(state.step_count + 1);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (const auto& [name, g] : grads) {
        auto ip = params.find(name);
        auto im = state.m.find(name);
        auto iv = state.v.find(name);
        if (ip == params.end() || im == state.m.end() || iv == state.v.end()) {
            throw ConfigError("adamw_step: no parameter/optimizer state for '" + name + "'");
        }
        auto& p = ip->second;
        auto& m = im->second;
        auto& v = iv->second;
        if (p.shape() != g.shape() || m.shape() != g.shape() || v.shape() != g.shape()) {
            throw ConfigError("adamw_step: shape mismatch for '" + name + "': param " + shape_str(p.shape()) +
                              ", grad " + shape_str(g.shape()));
        }
        const double wd = decays(p.shape()) ? cfg.weight_decay : 0.0;
        T* pd = p.data();
        T* md = m.data();
        T* vd = v.data();
        const T* gd = g.data();
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double gi = gd[i];
            const double mi = cfg.beta1 * double(md[i]) + (1.0 - cfg.beta1) * gi;
            const double vi = cfg.beta2 * double(vd[i]) + (1.0 - cfg.beta2) * gi * gi;
            md[i] = static_cast<T>(mi);
            vd[i] = static_cast<T>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            const double pi = double(pd[i]);
            pd[i] = static_cast<T>(pi - lr * (mhat / (std::sqrt(vhat) + cfg.eps) + wd * pi));
        }
    }
    state.step_count += 1;
}

template struct OptimState<float>;
template struct OptimState<double>;
template void adamw_step<float>(TensorMap<float>&, const GradSet<float>&, OptimState<float>&, double,
                                const AdamWConfig&);
template void adamw_step<double>(TensorMap<double>&, const GradSet<double>&, OptimState<double>&, double,
                                 const AdamWConfig&);

}  // namespace llf
