#pragma once

#include <array>
#include <string_view>

namespace embreg {

/// Every way a training run can use (or ignore) the pre-trained features.
enum class Method { None, FeatureOnly, Concat, FiLM, ConReg, DisReg };

inline constexpr std::array<Method, 6> kAllMethods = {Method::None,   Method::FeatureOnly, Method::Concat,
                                                      Method::FiLM,   Method::ConReg,      Method::DisReg};

/// Regularizers touch the features only through the loss.
constexpr bool is_regularizer(Method m) { return m == Method::ConReg || m == Method::DisReg; }
/// Integration baselines feed the features into the forward pass.
constexpr bool is_integration(Method m) {
  return m == Method::FeatureOnly || m == Method::Concat || m == Method::FiLM;
}
constexpr bool uses_features(Method m) { return m != Method::None; }
constexpr bool needs_features_at_inference(Method m) { return is_integration(m); }

/// Tuned loss weights: 5 for Con-Reg, 1 for Dis-Reg.
constexpr double default_alpha(Method m) {
  switch (m) {
    case Method::ConReg:
      return 5.0;
    case Method::DisReg:
      return 1.0;
    default:
      return 0.0;
  }
}

std::string_view to_string(Method m);
/// Accepts the CLI spellings: none, feature-only, concat, film, con-reg, dis-reg.
Method parse_method(std::string_view text);

}  // namespace embreg
