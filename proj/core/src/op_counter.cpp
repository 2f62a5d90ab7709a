#include "p3p/op_counter.hpp"

namespace p3p {

namespace {
thread_local OpCounter* g_active = nullptr;
}

OpCounter* active_op_counter() { return g_active; }

ScopedOpCounter::ScopedOpCounter(OpCounter& counter) : previous_(g_active) {
    g_active = &counter;
}

ScopedOpCounter::~ScopedOpCounter() { g_active = previous_; }

}  // namespace p3p
