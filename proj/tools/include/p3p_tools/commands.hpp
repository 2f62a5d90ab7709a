#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace p3p::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;  // validation or configuration failure
inline constexpr int kExitIo = 2;       // file could not be read or written

struct LiftOptions {
    std::string image, depth, out;
    std::optional<std::uint64_t> rotate_seed;
    std::uint64_t seed = 0;
};

struct TokenizeOptions {
    std::string in, config, out, checkpoint;
    std::optional<std::uint64_t> seed;
};

struct PretrainOptions {
    std::string data, config, out, log;
    std::optional<std::int64_t> steps;
    std::optional<std::uint64_t> seed;
};

struct GradcheckOptions {
    std::string config;
    std::size_t samples = 20;
    double tolerance = 1e-4;
    double step = 1e-5;
    std::optional<std::uint64_t> seed;
};

struct BenchOptions {
    std::vector<std::uint64_t> sizes{2000, 4000, 8000, 16000, 32000, 64000};
    std::string out;
    bool timings = true;
    std::uint64_t seed = 0;
};

// Each command reports progress to `out`, problems to `err`, and returns an
// exit code. Exceptions never escape.
int cmd_lift(const LiftOptions& opt, std::ostream& out, std::ostream& err);
int cmd_tokenize(const TokenizeOptions& opt, std::ostream& out, std::ostream& err);
int cmd_pretrain(const PretrainOptions& opt, std::ostream& out, std::ostream& err);
int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out, std::ostream& err);
int cmd_bench(const BenchOptions& opt, std::ostream& out, std::ostream& err);

// Parses argv and dispatches to a command.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace p3p::cli
