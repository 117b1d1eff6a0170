#include "derdose/regression.hpp"

namespace derdose {

std::string_view to_string(FitStatus status) {
  switch (status) {
    case FitStatus::Ok:
      return "ok";
    case FitStatus::RankDeficient:
      return "rank-deficient";
    case FitStatus::Separation:
      return "separation";
    case FitStatus::OneClassOnly:
      return "one-class-only";
    case FitStatus::IterationLimit:
      return "iteration-limit";
  }
  return "?";
}

std::string_view to_string(Link link) {
  return link == Link::Probit ? "probit" : "logit";
}

std::string_view to_string(IrlsVariant variant) {
  return variant == IrlsVariant::Guarded ? "guarded" : "r-compat";
}

}  // namespace derdose
