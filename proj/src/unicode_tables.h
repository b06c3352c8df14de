// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace llf::unicode {

bool is_letter(char32_t cp);
bool is_number(char32_t cp);
bool is_space(char32_t cp);

}  // namespace llf::unicode
