#include "embreg/method.hpp"

#include "embreg/tensor.hpp"

#include <string>

namespace embreg {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::None:
      return "none";
    case Method::FeatureOnly:
      return "feature-only";
    case Method::Concat:
      return "concat";
    case Method::FiLM:
      return "film";
    case Method::ConReg:
      return "con-reg";
    case Method::DisReg:
      return "dis-reg";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  for (Method m : kAllMethods) {
    if (to_string(m) == text) return m;
  }
  throw ArgumentError("unknown method '" + std::string(text) + "'");
}

}  // namespace embreg
