#include "mdgp/warnings.hpp"

#include <iostream>
#include <mutex>

namespace mdgp {

namespace {
std::mutex warning_mutex;
WarningCapture *active_capture = nullptr;
}  // namespace

void warn(const std::string &message) {
  std::lock_guard<std::mutex> lock(warning_mutex);
  if (active_capture != nullptr) {
    active_capture->messages_.push_back(message);
    return;
  }
  std::cerr << "warning: " << message << '\n';
}

WarningCapture::WarningCapture() {
  std::lock_guard<std::mutex> lock(warning_mutex);
  previous_ = active_capture;
  active_capture = this;
}

WarningCapture::~WarningCapture() {
  std::lock_guard<std::mutex> lock(warning_mutex);
  active_capture = previous_;
}

std::vector<std::string> WarningCapture::messages() const {
  std::lock_guard<std::mutex> lock(warning_mutex);
  return messages_;
}

}  // namespace mdgp
