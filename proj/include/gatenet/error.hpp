#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gatenet {

/// Base class of every error raised by the library. The CLI maps these to
/// exit code 1.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error
{
public:
    using Error::Error;
};

class ArgumentError : public Error
{
public:
    using Error::Error;
};

class MalformedFileError : public Error
{
public:
    using Error::Error;
};

class CorruptRecordError : public Error
{
public:
    CorruptRecordError(std::size_t record, int label)
        : Error("corrupt record " + std::to_string(record) + ": label byte " + std::to_string(label) +
                " is not a class index in [0, 9]"),
          record_(record)
    {}

    std::size_t record() const { return record_; }

private:
    std::size_t record_;
};

class EmptyDatasetError : public Error
{
public:
    using Error::Error;
};

class DegenerateStatisticsError : public Error
{
public:
    using Error::Error;
};

class UnknownCategoryError : public Error
{
public:
    using Error::Error;
};

class UnknownTaskError : public Error
{
public:
    using Error::Error;
};

class MissingTraceError : public Error
{
public:
    using Error::Error;
};

class LabelError : public Error
{
public:
    LabelError(std::size_t row, long label)
        : Error("label " + std::to_string(label) + " at row " + std::to_string(row) + " is out of range"),
          row_(row)
    {}

    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

class CompatibilityError : public Error
{
public:
    using Error::Error;
};

class MissingGatesError : public Error
{
public:
    using Error::Error;
};

class ConfigError : public Error
{
public:
    using Error::Error;
};

class CheckpointError : public Error
{
public:
    enum class Kind
    {
        NotACheckpoint,
        UnsupportedVersion,
        KindMismatch,
        IncompatibleBase,
        Corrupt,
        Io,
    };

    CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

}  // namespace gatenet
