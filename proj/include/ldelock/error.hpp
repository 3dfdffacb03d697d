#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ldelock {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
public:
    SyntaxError(std::size_t line, std::size_t column, const std::string& reason)
        : Error("line " + std::to_string(line) + ", col " + std::to_string(column) + ": " + reason),
          line_(line), column_(column), reason_(reason) {}

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }
    const std::string& reason() const { return reason_; }

private:
    std::size_t line_;
    std::size_t column_;
    std::string reason_;
};

class UnknownNode : public Error { public: using Error::Error; };
class DuplicateName : public Error { public: using Error::Error; };
class MissingDirective : public Error { public: using Error::Error; };
class EvenStageCount : public Error { public: using Error::Error; };
class UnknownDevice : public Error { public: using Error::Error; };

class DeviceOffAtCalibration : public Error { public: using Error::Error; };

class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, std::string worst_node, double worst_residual)
        : Error(what), worst_node_(std::move(worst_node)), worst_residual_(worst_residual) {}
    const std::string& worst_node() const { return worst_node_; }
    double worst_residual() const { return worst_residual_; }

private:
    std::string worst_node_;
    double worst_residual_;
};

class SingularMatrix : public Error {
public:
    SingularMatrix(const std::string& what, double frequency)
        : Error(what), frequency_(frequency) {}
    double frequency() const { return frequency_; }

private:
    double frequency_;
};

class EmptySweep : public Error { public: using Error::Error; };
class NoRolloffInRange : public Error { public: using Error::Error; };

class InconsistentPlan : public Error { public: using Error::Error; };
class DoubleAssignment : public Error { public: using Error::Error; };
class TooManyDecoys : public Error { public: using Error::Error; };
class CannotEliminate : public Error { public: using Error::Error; };
class NoCandidates : public Error { public: using Error::Error; };

class InvalidKey : public Error {
public:
    enum class Reason { NoneHot, MultiHot, WrongLength };
    InvalidKey(std::size_t group, Reason reason, const std::string& what)
        : Error(what), group_(group), reason_(reason) {}
    std::size_t group() const { return group_; }
    Reason reason() const { return reason_; }

private:
    std::size_t group_;
    Reason reason_;
};

class KeyspaceTooLarge : public Error { public: using Error::Error; };
class SampleTooLarge : public Error { public: using Error::Error; };
class ResumeMismatch : public Error { public: using Error::Error; };
class EmptyRecords : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };

}  // namespace ldelock
