#pragma once

#include <gtest/gtest.h>

#include "iqpp/error.hpp"

// EXPECT_IQPP_ERROR(code, statement): the statement must throw iqpp::Error
// carrying `code`. Variadic so statements may contain commas.
#define EXPECT_IQPP_ERROR(expected, ...)                                             \
  do {                                                                               \
    try {                                                                            \
      __VA_ARGS__;                                                                   \
      ADD_FAILURE() << "expected " << iqpp::to_string(expected) << " from "          \
                    << #__VA_ARGS__;                                                 \
    } catch (const iqpp::Error& e_) {                                                \
      EXPECT_EQ(iqpp::to_string(e_.code()), iqpp::to_string(expected)) << e_.what(); \
    }                                                                                \
  } while (0)
