#include "asts/dyadic.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace asts {

namespace {

using i128 = __int128;

Dyadic from_wide(i128 num, int exp) {
    while (exp > 0 && (num & 1) == 0) {
        num >>= 1;
        --exp;
    }
    if (exp > Dyadic::kMaxExponent) throw std::overflow_error("dyadic exponent exceeds 62");
    if (num > std::numeric_limits<std::int64_t>::max() || num < std::numeric_limits<std::int64_t>::min())
        throw std::overflow_error("dyadic numerator overflow");
    return Dyadic::from_parts(static_cast<std::int64_t>(num), exp);
}

i128 scaled(Dyadic d, int exp) { return static_cast<i128>(d.numerator()) << (exp - d.exponent()); }

}  // namespace

Dyadic Dyadic::from_parts(std::int64_t numerator, int exponent) {
    if (exponent < 0) throw std::invalid_argument("negative dyadic exponent");
    if (numerator == 0) return Dyadic{};
    if (exponent > 0) {
        int tz = std::countr_zero(static_cast<std::uint64_t>(numerator));
        int shift = tz < exponent ? tz : exponent;
        numerator >>= shift;
        exponent -= shift;
    }
    if (exponent > kMaxExponent) throw std::overflow_error("dyadic exponent exceeds 62");
    Dyadic d;
    d.num_ = numerator;
    d.exp_ = exponent;
    return d;
}

Dyadic Dyadic::parse(const std::string& text) {
    auto slash = text.find('/');
    if (slash == std::string::npos) return Dyadic(std::stoll(text));
    std::int64_t num = std::stoll(text.substr(0, slash));
    std::uint64_t den = std::stoull(text.substr(slash + 1));
    if (den == 0 || !std::has_single_bit(den)) throw std::invalid_argument("not a dyadic rational: " + text);
    return from_parts(num, std::countr_zero(den));
}

double Dyadic::to_double() const { return std::ldexp(static_cast<double>(num_), -exp_); }

std::string Dyadic::str() const {
    if (exp_ == 0) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(std::uint64_t{1} << exp_);
}

std::int64_t Dyadic::floor() const { return num_ >> exp_; }

std::int64_t Dyadic::ceil() const { return -((-num_) >> exp_); }

Dyadic Dyadic::operator+(Dyadic o) const {
    int e = exp_ > o.exp_ ? exp_ : o.exp_;
    return from_wide(scaled(*this, e) + scaled(o, e), e);
}

Dyadic Dyadic::operator-(Dyadic o) const {
    int e = exp_ > o.exp_ ? exp_ : o.exp_;
    return from_wide(scaled(*this, e) - scaled(o, e), e);
}

Dyadic Dyadic::times_int(std::int64_t k) const { return from_wide(static_cast<i128>(num_) * k, exp_); }

Dyadic Dyadic::times_pow2(int k) const {
    if (k >= 0) return from_wide(static_cast<i128>(num_) << k, exp_);
    return from_wide(num_, exp_ - k);
}

std::strong_ordering operator<=>(Dyadic a, Dyadic b) {
    if (a.exp_ == b.exp_) return a.num_ <=> b.num_;
    int e = a.exp_ > b.exp_ ? a.exp_ : b.exp_;
    i128 x = scaled(a, e), y = scaled(b, e);
    if (x < y) return std::strong_ordering::less;
    if (x > y) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
}

Dyadic midpoint(Dyadic a, Dyadic b) { return (a + b).half(); }

std::pair<Dyadic, Dyadic> componentwise_dist(IndexVec2 a, IndexVec2 b) {
    return {(a.x - b.x).abs(), (a.y - b.y).abs()};
}

IndexVec2 translate_point(IndexVec2 x, DegreePair p, std::array<int, 2> n) {
    return {clamp(x.x, Dyadic(p[0]), Dyadic(n[0])), clamp(x.y, Dyadic(p[1]), Dyadic(n[1]))};
}

std::string IndexRect::str() const {
    return "[" + x0.str() + "," + x1.str() + "]x[" + y0.str() + "," + y1.str() + "]";
}

}  // namespace asts
