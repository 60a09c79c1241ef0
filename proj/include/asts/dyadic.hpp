#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>

namespace asts {

// Exact dyadic rational numerator / 2^exponent, kept in canonical form
// (numerator odd or exponent zero).
class Dyadic {
public:
    static constexpr int kMaxExponent = 62;

    constexpr Dyadic() = default;
    constexpr Dyadic(std::int64_t integer) : num_(integer), exp_(0) {}  // NOLINT: implicit by design

    static Dyadic from_parts(std::int64_t numerator, int exponent);
    static Dyadic parse(const std::string& text);

    std::int64_t numerator() const { return num_; }
    int exponent() const { return exp_; }
    double to_double() const;
    std::string str() const;

    std::int64_t floor() const;
    std::int64_t ceil() const;
    bool is_integer() const { return exp_ == 0; }

    Dyadic operator+(Dyadic other) const;
    Dyadic operator-(Dyadic other) const;
    Dyadic operator-() const { return from_parts(-num_, exp_); }
    Dyadic& operator+=(Dyadic other) { return *this = *this + other; }
    Dyadic& operator-=(Dyadic other) { return *this = *this - other; }
    Dyadic times_int(std::int64_t k) const;
    Dyadic times_pow2(int k) const;  // k may be negative
    Dyadic half() const { return times_pow2(-1); }
    Dyadic abs() const { return num_ < 0 ? -*this : *this; }

    friend bool operator==(Dyadic a, Dyadic b) { return a.num_ == b.num_ && a.exp_ == b.exp_; }
    friend std::strong_ordering operator<=>(Dyadic a, Dyadic b);

private:
    std::int64_t num_ = 0;
    int exp_ = 0;
};

Dyadic midpoint(Dyadic a, Dyadic b);
inline Dyadic min(Dyadic a, Dyadic b) { return b < a ? b : a; }
inline Dyadic max(Dyadic a, Dyadic b) { return a < b ? b : a; }
inline Dyadic clamp(Dyadic v, Dyadic lo, Dyadic hi) { return v < lo ? lo : (hi < v ? hi : v); }

struct IndexVec2 {
    Dyadic x;
    Dyadic y;
    friend bool operator==(const IndexVec2&, const IndexVec2&) = default;
    friend auto operator<=>(const IndexVec2& a, const IndexVec2& b) {
        if (auto c = a.x <=> b.x; c != 0) return c;
        return a.y <=> b.y;
    }
};

using DegreePair = std::array<int, 2>;

std::pair<Dyadic, Dyadic> componentwise_dist(IndexVec2 a, IndexVec2 b);

// Clamp each coordinate into [p_d, n_d].
IndexVec2 translate_point(IndexVec2 x, DegreePair p, std::array<int, 2> n);

struct IndexRect {
    Dyadic x0, y0, x1, y1;

    Dyadic width() const { return x1 - x0; }
    Dyadic height() const { return y1 - y0; }
    IndexVec2 center() const { return {midpoint(x0, x1), midpoint(y0, y1)}; }
    bool contains(IndexVec2 p) const { return x0 <= p.x && p.x <= x1 && y0 <= p.y && p.y <= y1; }
    bool contains(const IndexRect& r) const {
        return x0 <= r.x0 && r.x1 <= x1 && y0 <= r.y0 && r.y1 <= y1;
    }
    bool intersects_closed(const IndexRect& r) const {
        return x0 <= r.x1 && r.x0 <= x1 && y0 <= r.y1 && r.y0 <= y1;
    }
    bool intersects_open(const IndexRect& r) const {
        return x0 < r.x1 && r.x0 < x1 && y0 < r.y1 && r.y0 < y1;
    }
    std::string str() const;

    friend bool operator==(const IndexRect&, const IndexRect&) = default;
    friend auto operator<=>(const IndexRect& a, const IndexRect& b) {
        if (auto c = a.x0 <=> b.x0; c != 0) return c;
        if (auto c = a.y0 <=> b.y0; c != 0) return c;
        if (auto c = a.x1 <=> b.x1; c != 0) return c;
        return a.y1 <=> b.y1;
    }
};

struct DyadicHash {
    std::size_t operator()(Dyadic d) const noexcept {
        auto h = std::hash<std::int64_t>{}(d.numerator());
        return h ^ (static_cast<std::size_t>(d.exponent()) * 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    }
};

}  // namespace asts
