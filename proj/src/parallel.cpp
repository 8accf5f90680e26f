#include "statnet/parallel.hpp"

#include <cstdlib>
#include <string>

namespace statnet {

std::size_t worker_threads_from_env() {
    if (const char* env = std::getenv("STATNET_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace statnet
