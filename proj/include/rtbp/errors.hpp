#pragma once
#include <stdexcept>
#include <string>

namespace rtbp {

/// Base of all library failures; carries a short machine-readable kind.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }
private:
    std::string kind_;
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& w) : Error("DomainError", w) {}
};

class CollisionError : public Error {
public:
    explicit CollisionError(const std::string& w) : Error("CollisionError", w) {}
};

class StepSizeUnderflow : public Error {
public:
    explicit StepSizeUnderflow(const std::string& w) : Error("StepSizeUnderflow", w) {}
};

class HorizonExceeded : public Error {
public:
    explicit HorizonExceeded(const std::string& w) : Error("HorizonExceeded", w) {}
};

class NoCrossing : public Error {
public:
    explicit NoCrossing(const std::string& w) : Error("NoCrossing", w) {}
};

class QuadratureFailure : public Error {
public:
    explicit QuadratureFailure(const std::string& w) : Error("QuadratureFailure", w) {}
};

class NondegeneracyFailure : public Error {
public:
    explicit NondegeneracyFailure(const std::string& w) : Error("NondegeneracyFailure", w) {}
};

class ChannelLost : public Error {
public:
    explicit ChannelLost(const std::string& w) : Error("ChannelLost", w) {}
};

class OrderSolveFailure : public Error {
public:
    OrderSolveFailure(int order, const std::string& w)
        : Error("OrderSolveFailure", "order " + std::to_string(order) + ": " + w), order_(order) {}
    int order() const noexcept { return order_; }
private:
    int order_;
};

class ChartMismatch : public Error {
public:
    explicit ChartMismatch(const std::string& w) : Error("ChartMismatch", w) {}
};

class NoIntersection : public Error {
public:
    explicit NoIntersection(const std::string& w) : Error("NoIntersection", w) {}
};

class DegenerateSplitting : public Error {
public:
    explicit DegenerateSplitting(const std::string& w) : Error("DegenerateSplitting", w) {}
};

class BoundViolation : public Error {
public:
    BoundViolation(const std::string& w, double s) : Error("BoundViolation", w), s_(s) {}
    double witness_time() const noexcept { return s_; }
private:
    double s_;
};

class PrecisionExhausted : public Error {
public:
    PrecisionExhausted(int links, const std::string& w)
        : Error("PrecisionExhausted", w), links_(links) {}
    int links() const noexcept { return links_; }
private:
    int links_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& w) : Error("ConfigError", w) {}
};

}  // namespace rtbp
