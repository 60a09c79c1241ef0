#include "asts/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace asts {

int thread_count() {
    const char* env = std::getenv("ASTS_THREADS");
    if (!env) return 1;
    try {
        return std::clamp(std::stoi(env), 1, 64);
    } catch (const std::exception&) {
        return 1;
    }
}

void parallel_chunks(std::size_t n, int chunks, const std::function<void(int, std::size_t, std::size_t)>& body) {
    chunks = std::max(1, std::min<int>(chunks, static_cast<int>(std::max<std::size_t>(n, 1))));
    auto bounds = [&](int c) { return n * static_cast<std::size_t>(c) / static_cast<std::size_t>(chunks); };
    if (chunks == 1) {
        body(0, 0, n);
        return;
    }
    std::vector<std::thread> pool;
    for (int c = 0; c < chunks; ++c) pool.emplace_back(body, c, bounds(c), bounds(c + 1));
    for (auto& t : pool) t.join();
}

}  // namespace asts
