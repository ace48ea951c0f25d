#include "vln/errors.hpp"

namespace vln {

int exit_code_for(Error::Category c) noexcept {
  switch (c) {
    case Error::Category::Config:
      return 2;
    case Error::Category::Io:
      return 3;
    case Error::Category::Numeric:
      return 4;
    case Error::Category::Usage:
      return 5;
    case Error::Category::Data:
      return 6;
  }
  return 1;
}

}  // namespace vln
