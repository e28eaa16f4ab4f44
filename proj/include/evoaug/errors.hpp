#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evoaug {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class InvalidTree : public Error {
public:
    explicit InvalidTree(std::string reason)
        : Error("invalid tree: " + reason), reason_(std::move(reason)) {}
    const std::string& reason() const { return reason_; }

private:
    std::string reason_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t position, std::string expected)
        : Error("parse error at offset " + std::to_string(position) + ": expected " + expected),
          position_(position),
          expected_(std::move(expected)) {}
    std::size_t position() const { return position_; }
    const std::string& expected() const { return expected_; }

private:
    std::size_t position_;
    std::string expected_;
};

class OperatorError : public Error {
public:
    OperatorError(std::string op, std::string detail)
        : Error("operator " + op + " failed: " + detail), op_(std::move(op)), detail_(std::move(detail)) {}
    const std::string& op() const { return op_; }
    const std::string& detail() const { return detail_; }

private:
    std::string op_;
    std::string detail_;
};

class UnknownOperator : public Error {
public:
    explicit UnknownOperator(const std::string& tag) : Error("unknown operator: " + tag) {}
};

class DuplicateOperator : public Error {
public:
    explicit DuplicateOperator(const std::string& tag) : Error("operator already registered: " + tag) {}
};

class WorkerUnreachable : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    ProtocolError(std::string field, const std::string& detail)
        : Error("protocol error in field '" + field + "': " + detail), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class ManifestError : public Error {
public:
    ManifestError(std::size_t line, const std::string& detail)
        : Error("manifest line " + std::to_string(line) + ": " + detail), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class EmptyClass : public Error {
public:
    explicit EmptyClass(const std::string& name) : Error("class has no items: " + name) {}
};

class TooFewItems : public Error {
public:
    TooFewItems(std::string class_name, const std::string& detail)
        : Error("too few items in class " + class_name + ": " + detail), class_name_(std::move(class_name)) {}
    const std::string& class_name() const { return class_name_; }

private:
    std::string class_name_;
};

class TooFewClasses : public Error {
public:
    using Error::Error;
};

class MissingEmbedding : public Error {
public:
    explicit MissingEmbedding(const std::string& id) : Error("no embedding for id: " + id), id_(id) {}
    const std::string& id() const { return id_; }

private:
    std::string id_;
};

class NonFiniteEmbedding : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class SingleCluster : public Error {
public:
    SingleCluster() : Error("metric needs at least two clusters") {}
    explicit SingleCluster(const std::string& what) : Error(what) {}
};

class CoincidentCentroids : public Error {
public:
    CoincidentCentroids() : Error("two clusters share a centroid") {}
    explicit CoincidentCentroids(const std::string& what) : Error(what) {}
};

class DepthMismatch : public Error {
public:
    DepthMismatch(int a, int b)
        : Error("crossover parents differ in depth: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

}  // namespace evoaug
