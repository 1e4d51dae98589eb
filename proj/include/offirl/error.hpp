#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace offirl {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// Malformed model data: a probability row off the simplex, a bad index in a
/// dataset file, a missing JSON field.
class SchemaError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class EmptyActionSet : public Error {
public:
    using Error::Error;
};

class SubsetOutsideSupport : public Error {
public:
    using Error::Error;
};

/// Two distinct actions were observed for the expert at the same (state, stage).
class NonDeterministicExpert : public Error {
public:
    NonDeterministicExpert(int state, int stage, int first, int second)
        : Error("expert is not deterministic at state " + std::to_string(state) + ", stage " +
                std::to_string(stage) + ": actions " + std::to_string(first) + " and " +
                std::to_string(second) + " both observed"),
          state(state), stage(stage), first_action(first), second_action(second) {}

    int state;
    int stage;
    int first_action;
    int second_action;
};

/// The behavioral data never plays the expert's action at an expert-visited
/// (state, stage): the expert-coverage assumption is violated.
class ExpertTripleUncovered : public Error {
public:
    ExpertTripleUncovered(int state, int stage)
        : Error("expert triple at state " + std::to_string(state) + ", stage " +
                std::to_string(stage) + " is not covered by the behavioral data"),
          state(state), stage(stage) {}

    int state;
    int stage;
};

class SupportInfeasible : public Error {
public:
    using Error::Error;
};

class SpecMismatch : public Error {
public:
    using Error::Error;
};

class EmptyPanel : public Error {
public:
    using Error::Error;
};

class EnumerationTooLarge : public Error {
public:
    explicit EnumerationTooLarge(double count)
        : Error("enumeration of " + std::to_string(count) + " combinations exceeds the cap"),
          count(count) {}

    double count;
};

class HypothesisUnmet : public Error {
public:
    using Error::Error;
};

}  // namespace offirl
