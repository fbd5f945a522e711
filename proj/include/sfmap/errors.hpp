#pragma once

#include <exception>
#include <stdexcept>
#include <string>

namespace sfmap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define SFMAP_DECLARE_ERROR(Name)                 \
    class Name : public Error {                   \
    public:                                       \
        explicit Name(const std::string& what)    \
            : Error(std::string(#Name ": ") + what) \
        {}                                        \
    }

SFMAP_DECLARE_ERROR(ParseError);
SFMAP_DECLARE_ERROR(TopologyError);
SFMAP_DECLARE_ERROR(DegenerateTriangleError);
SFMAP_DECLARE_ERROR(SamplingError);
SFMAP_DECLARE_ERROR(CoverageError);
SFMAP_DECLARE_ERROR(NonTerminationError);
SFMAP_DECLARE_ERROR(IllConditionedError);
SFMAP_DECLARE_ERROR(ConvergenceError);
SFMAP_DECLARE_ERROR(RankDeficientError);
SFMAP_DECLARE_ERROR(ScheduleError);
SFMAP_DECLARE_ERROR(MissingGTError);
SFMAP_DECLARE_ERROR(DimensionError);
SFMAP_DECLARE_ERROR(HypothesisError);
SFMAP_DECLARE_ERROR(InitMapError);
SFMAP_DECLARE_ERROR(IndexRangeError);
SFMAP_DECLARE_ERROR(CacheError);

#undef SFMAP_DECLARE_ERROR

/// A module error annotated with the pipeline stage it came from.
/// `rethrow_inner()` re-raises the original exception with its own type.
class StageError : public Error {
public:
    StageError(const std::string& stage, std::exception_ptr inner, const std::string& what)
        : Error(stage + ": " + what), stage_(stage), inner_(std::move(inner))
    {}
    template <class E>
    StageError(const std::string& stage, const E& inner)
        : StageError(stage, std::make_exception_ptr(inner), inner.what())
    {}

    const std::string& stage() const { return stage_; }
    [[noreturn]] void rethrow_inner() const { std::rethrow_exception(inner_); }

private:
    std::string stage_;
    std::exception_ptr inner_;
};

} // namespace sfmap
