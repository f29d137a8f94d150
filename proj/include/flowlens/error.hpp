#pragma once

#include <stdexcept>
#include <string>

namespace flowlens {

// Error categories map 1:1 onto CLI exit codes and C API status values:
// config = 2, io = 3, numeric = 4.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

class config_error : public error {
 public:
  explicit config_error(const std::string& msg) : error(msg) {}
};

class io_error : public error {
 public:
  explicit io_error(const std::string& msg) : error(msg) {}
};

class numeric_error : public error {
 public:
  explicit numeric_error(const std::string& msg) : error(msg) {}
};

}  // namespace flowlens
