#include "svs/error.hpp"

namespace svs {

int Error::exit_code() const noexcept {
    switch (kind_) {
    case ErrorKind::Io:
        return 3;
    case ErrorKind::Numerical:
        return 4;
    default:
        return 2;
    }
}

}  // namespace svs
