#pragma once

#include <stdexcept>
#include <string>

namespace retistack {

// Error categories map 1:1 onto the CLI exit-code contract:
// validation -> 2, numeric -> 3, degenerate -> 4.
enum class errc {
    validation,
    numeric,
    degenerate,
};

class Error : public std::runtime_error {
public:
    Error(errc kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    errc kind() const { return kind_; }

    int exit_code() const {
        switch (kind_) {
        case errc::validation: return 2;
        case errc::numeric: return 3;
        case errc::degenerate: return 4;
        }
        return 1;
    }

private:
    errc kind_;
};

[[noreturn]] inline void fail_validation(const std::string& msg) { throw Error(errc::validation, msg); }
[[noreturn]] inline void fail_numeric(const std::string& msg) { throw Error(errc::numeric, msg); }
[[noreturn]] inline void fail_degenerate(const std::string& msg) { throw Error(errc::degenerate, msg); }

} // namespace retistack
