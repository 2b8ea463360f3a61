#pragma once

#include <string>

#include "streamforge/minicp/ast.hpp"
#include "streamforge/minicp/errors.hpp"

namespace streamforge::minicp {

/// Parses a single expression. Throws ParseError on malformed input or
/// trailing garbage. Name resolution happens later, against a model.
ExprPtr parse_expression(const std::string& text);

}  // namespace streamforge::minicp
