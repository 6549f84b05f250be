#pragma once

#include <string>
#include <vector>

namespace mdgp {

/// Emits a non-fatal warning. Written to stderr unless a WarningCapture is
/// active, in which case the message is recorded there instead.
void warn(const std::string &message);

/// Collects warnings emitted during its lifetime (any thread).
class WarningCapture {
 public:
  WarningCapture();
  ~WarningCapture();
  WarningCapture(const WarningCapture &) = delete;
  WarningCapture &operator=(const WarningCapture &) = delete;

  std::vector<std::string> messages() const;

 private:
  std::vector<std::string> messages_;
  WarningCapture *previous_;
  friend void warn(const std::string &);
};

}  // namespace mdgp
