#pragma once

#include <optional>

#include "doctest.h"
#include "imdn/error.hpp"

template <class F>
std::optional<imdn::ErrorCode> error_code_of(F&& f) {
  try {
    f();
  } catch (const imdn::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

#define CHECK_ERROR(expr, ec) CHECK(error_code_of([&] { (void)(expr); }) == std::optional(ec))
