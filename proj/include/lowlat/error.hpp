#pragma once

#include <stdexcept>
#include <string>

namespace lowlat {

// Input or invariant problems. The CLI maps these to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InfeasibleBlockError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class UnsupportedLayoutError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ShapeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ManifestError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DesignRangeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class InsufficientLengthError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class SampleSizeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class FormatError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ComparisonError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Failures that happen while doing the work. Exit code 3.
class MeasurementError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateWeightsError : public MeasurementError {
public:
    using MeasurementError::MeasurementError;
};

class UndefinedLoudnessError : public MeasurementError {
public:
    using MeasurementError::MeasurementError;
};

} // namespace lowlat
