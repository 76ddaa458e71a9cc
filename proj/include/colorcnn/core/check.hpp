#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace colorcnn {

// Contract violations throw; callers that can recover catch std::runtime_error.
#define COLORCNN_CHECK(cond, msg)                                    \
  do {                                                               \
    if (!(cond)) {                                                   \
      std::ostringstream oss_;                                       \
      oss_ << "check failed: " << #cond << " - " << msg;             \
      throw std::runtime_error(oss_.str());                          \
    }                                                                \
  } while (0)

}  // namespace colorcnn
