#pragma once

#include <cstdint>

namespace p3p {

// Floating-point operation tallies, one slot per tokenizer stage. Only the
// instrumented tokenizer routines write here; a null active counter makes
// the instrumentation a no-op.
struct OpCounter {
    std::uint64_t voxelize = 0;
    std::uint64_t graph = 0;
    std::uint64_t swi = 0;
    std::uint64_t posembed = 0;
    std::uint64_t fps = 0;
    std::uint64_t knn = 0;
    std::uint64_t pointnet = 0;

    std::uint64_t vps_total() const { return voxelize + graph + swi + posembed; }
    std::uint64_t fkp_total() const { return fps + knn + pointnet; }
};

OpCounter* active_op_counter();

// Installs `counter` as the thread's active counter for the scope lifetime.
class ScopedOpCounter {
public:
    explicit ScopedOpCounter(OpCounter& counter);
    ~ScopedOpCounter();
    ScopedOpCounter(const ScopedOpCounter&) = delete;
    ScopedOpCounter& operator=(const ScopedOpCounter&) = delete;

private:
    OpCounter* previous_;
};

namespace ops {

// Cost model shared by the instrumentation and the analytic formulas.
inline constexpr std::uint64_t kMac = 2;
inline constexpr std::uint64_t kSquaredDistance3 = 8;
inline constexpr std::uint64_t kCompare = 1;

}  // namespace ops

}  // namespace p3p
