#pragma once

// Seeded key generators: uniform, normal, beta and power-law over a key
// interval, producing distinct keys.

#include "nbdt/keyspace.hpp"
#include "nbdt/random.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace nbdt
{
    enum class DistributionKind : std::uint8_t
    {
        Uniform,
        Normal,
        Beta,
        PowLaw,
    };

    inline std::string_view to_string(DistributionKind k) noexcept
    {
        switch (k)
        {
        case DistributionKind::Uniform:
            return "uniform";
        case DistributionKind::Normal:
            return "normal";
        case DistributionKind::Beta:
            return "beta";
        case DistributionKind::PowLaw:
            return "powlaw";
        }
        return "?";
    }

    inline std::optional<DistributionKind> parse_distribution_kind(std::string_view s)
    {
        if (s == "uniform")
        {
            return DistributionKind::Uniform;
        }
        if (s == "normal")
        {
            return DistributionKind::Normal;
        }
        if (s == "beta")
        {
            return DistributionKind::Beta;
        }
        if (s == "powlaw" || s == "pow-law" || s == "power-law")
        {
            return DistributionKind::PowLaw;
        }
        return std::nullopt;
    }

    /// Kind-specific parameters; fields outside the kind are ignored.
    ///   normal: mean, stddev (absolute key units)
    ///   beta:   alpha, beta (shape over the unit interval scaled to the range)
    ///   powlaw: exponent of the density, scale = key distance of one rank unit
    struct DistributionParams
    {
        double mean = 0.0;
        double stddev = 0.0;
        double alpha = 2.0;
        double beta = 2.0;
        double exponent = 2.5;
        double scale = 1.0;

        friend bool operator==(const DistributionParams &, const DistributionParams &) = default;
    };

    struct DistributionSpec
    {
        DistributionKind kind = DistributionKind::Uniform;
        DistributionParams params;
        std::uint64_t seed = 0;
        KeyRange range;

        friend bool operator==(const DistributionSpec &, const DistributionSpec &) = default;
    };

    inline DistributionParams distribution_params_default(DistributionKind kind, KeyRange range)
    {
        DistributionParams p;
        const double size = static_cast<double>(range.size());
        switch (kind)
        {
        case DistributionKind::Uniform:
            break;
        case DistributionKind::Normal:
            p.mean = static_cast<double>(range.lo) + size / 2.0;
            p.stddev = size / 8.0;
            break;
        case DistributionKind::Beta:
            p.alpha = 2.0;
            p.beta = 2.0;
            break;
        case DistributionKind::PowLaw:
            p.exponent = 2.5;
            p.scale = std::max(1.0, std::floor(size / 100.0));
            break;
        }
        return p;
    }

    /// Overrides with NaN fields take the default for the range.
    inline DistributionParams resolve_params(DistributionKind kind, const std::optional<DistributionParams> &overrides,
                                             KeyRange range)
    {
        DistributionParams p = distribution_params_default(kind, range);
        if (!overrides)
        {
            return p;
        }
        auto pick = [](double given, double fallback) { return std::isnan(given) ? fallback : given; };
        p.mean = pick(overrides->mean, p.mean);
        p.stddev = pick(overrides->stddev, p.stddev);
        p.alpha = pick(overrides->alpha, p.alpha);
        p.beta = pick(overrides->beta, p.beta);
        p.exponent = pick(overrides->exponent, p.exponent);
        p.scale = pick(overrides->scale, p.scale);
        return p;
    }

    inline DistributionSpec make_distribution(DistributionKind kind, KeyRange range, std::uint64_t seed)
    {
        return {kind, distribution_params_default(kind, range), seed, range};
    }

    inline void validate(const DistributionSpec &spec)
    {
        if (spec.range.hi < spec.range.lo)
        {
            throw std::invalid_argument("distribution range is empty");
        }
        const DistributionParams &p = spec.params;
        switch (spec.kind)
        {
        case DistributionKind::Uniform:
            break;
        case DistributionKind::Normal:
            if (!(p.stddev > 0.0) || !std::isfinite(p.mean))
            {
                throw std::invalid_argument("normal distribution needs a finite mean and stddev > 0");
            }
            break;
        case DistributionKind::Beta:
            if (!(p.alpha > 0.0) || !(p.beta > 0.0))
            {
                throw std::invalid_argument("beta distribution needs alpha > 0 and beta > 0");
            }
            break;
        case DistributionKind::PowLaw:
            if (!(p.exponent > 1.0) || !(p.scale > 0.0))
            {
                throw std::invalid_argument("power-law distribution needs exponent > 1 and scale > 0");
            }
            break;
        }
    }

    /// Draws keys from one distribution, with or without replacement.
    ///
    /// Ranges up to `dense_limit` keys keep the exact per-key probability
    /// mass in a Fenwick tree; drawing without replacement zeroes the drawn
    /// key, which is the distribution a redraw-on-collision loop converges
    /// to, without its cost once the head of a skewed law fills up. Larger
    /// ranges sample the continuous law and redraw on collision.
    class KeySampler
    {
    public:
        static constexpr std::uint64_t dense_limit = std::uint64_t{1} << 22;

        explicit KeySampler(DistributionSpec spec) : spec_(spec), size_(spec.range.size())
        {
            validate(spec_);
            if (size_ <= dense_limit)
            {
                build_dense();
            }
        }

        const DistributionSpec &spec() const noexcept { return spec_; }

        /// One key, with replacement.
        Key draw(Rng &rng)
        {
            if (dense())
            {
                return spec_.range.lo + locate(rng.uniform01() * total_);
            }
            for (;;)
            {
                if (auto k = draw_continuous(rng))
                {
                    return *k;
                }
            }
        }

        /// One key not drawn by a previous draw_distinct call.
        Key draw_distinct(Rng &rng)
        {
            if (dense())
            {
                if (!(total_ > 0.0) || taken_ == size_)
                {
                    throw std::runtime_error("distribution support exhausted");
                }
                const std::uint64_t i = locate(rng.uniform01() * total_);
                add(i, -weight_[i]);
                total_ -= weight_[i];
                weight_[i] = 0.0;
                ++taken_;
                if (taken_ == size_ || total_ < 0.0)
                {
                    total_ = std::max(total_, 0.0);
                }
                return spec_.range.lo + i;
            }
            for (std::uint64_t attempt = 0; attempt < max_attempts(); ++attempt)
            {
                const auto k = draw_continuous(rng);
                if (k && seen_.insert(*k).second)
                {
                    return *k;
                }
            }
            throw std::runtime_error("could not draw a fresh key; the request is too dense for this distribution");
        }

    private:
        bool dense() const noexcept { return !tree_.empty(); }

        std::uint64_t max_attempts() const noexcept { return 64 * (seen_.size() + 1) + 4096; }

        static double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
        static double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

        /// Probability mass of offset k (key lo + k).
        double mass(std::uint64_t k) const
        {
            const DistributionParams &p = spec_.params;
            const double x = static_cast<double>(k);
            switch (spec_.kind)
            {
            case DistributionKind::Uniform:
                return 1.0;
            case DistributionKind::Normal: {
                const double m = p.mean - static_cast<double>(spec_.range.lo);
                const double a = (x - m) / p.stddev;
                const double b = (x + 1.0 - m) / p.stddev;
                return a >= 0.0 ? normal_sf(a) - normal_sf(b) : normal_cdf(b) - normal_cdf(a);
            }
            case DistributionKind::Beta: {
                const double n = static_cast<double>(size_);
                const double a = x / n;
                const double b = std::min(1.0, (x + 1.0) / n);
                if (a >= 0.5)
                {
                    return boost::math::ibetac(p.alpha, p.beta, a) - boost::math::ibetac(p.alpha, p.beta, b);
                }
                return boost::math::ibeta(p.alpha, p.beta, b) - boost::math::ibeta(p.alpha, p.beta, a);
            }
            case DistributionKind::PowLaw: {
                const double tail = p.exponent - 1.0;
                return std::pow(1.0 + x / p.scale, -tail) - std::pow(1.0 + (x + 1.0) / p.scale, -tail);
            }
            }
            return 0.0;
        }

        void build_dense()
        {
            weight_.resize(size_);
            tree_.assign(size_ + 1, 0.0);
            for (std::uint64_t k = 0; k < size_; ++k)
            {
                weight_[k] = std::max(0.0, mass(k));
                total_ += weight_[k];
                tree_[k + 1] += weight_[k];
                const std::uint64_t parent = (k + 1) + ((k + 1) & (~(k + 1) + 1));
                if (parent <= size_)
                {
                    tree_[parent] += tree_[k + 1];
                }
            }
            if (!(total_ > 0.0))
            {
                throw std::invalid_argument("distribution puts no mass on the key range");
            }
        }

        void add(std::uint64_t k, double delta)
        {
            for (std::uint64_t i = k + 1; i <= size_; i += i & (~i + 1))
            {
                tree_[i] += delta;
            }
        }

        /// Smallest offset whose cumulative mass exceeds u; skips zero-mass
        /// offsets that rounding can land on.
        std::uint64_t locate(double u) const
        {
            std::uint64_t pos = 0;
            std::uint64_t step = 1;
            while ((step << 1) <= size_)
            {
                step <<= 1;
            }
            for (; step > 0; step >>= 1)
            {
                if (pos + step <= size_ && tree_[pos + step] <= u)
                {
                    pos += step;
                    u -= tree_[pos];
                }
            }
            std::uint64_t k = std::min(pos, size_ - 1);
            if (weight_[k] > 0.0)
            {
                return k;
            }
            for (std::uint64_t d = 1; d < size_; ++d)
            {
                if (k >= d && weight_[k - d] > 0.0)
                {
                    return k - d;
                }
                if (k + d < size_ && weight_[k + d] > 0.0)
                {
                    return k + d;
                }
            }
            throw std::runtime_error("distribution support exhausted");
        }

        std::optional<Key> draw_continuous(Rng &rng) const
        {
            const DistributionParams &p = spec_.params;
            const double n = static_cast<double>(size_);
            double offset = 0.0;
            switch (spec_.kind)
            {
            case DistributionKind::Uniform:
                return spec_.range.lo + rng.below(size_);
            case DistributionKind::Normal: {
                const double u1 = 1.0 - rng.uniform01();
                const double u2 = rng.uniform01();
                const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
                offset = p.mean + p.stddev * z - static_cast<double>(spec_.range.lo);
                break;
            }
            case DistributionKind::Beta:
                offset = boost::math::ibeta_inv(p.alpha, p.beta, rng.uniform01()) * n;
                break;
            case DistributionKind::PowLaw: {
                const double x = std::pow(1.0 - rng.uniform01(), -1.0 / (p.exponent - 1.0));
                offset = p.scale * (x - 1.0);
                break;
            }
            }
            if (!(offset >= 0.0) || offset >= n)
            {
                return std::nullopt;
            }
            return spec_.range.lo + static_cast<Key>(offset);
        }

        DistributionSpec spec_;
        std::uint64_t size_;
        std::vector<double> weight_;
        std::vector<double> tree_;
        double total_ = 0.0;
        std::uint64_t taken_ = 0;
        std::unordered_set<Key> seen_;
    };

    /// n distinct keys from spec, ascending. Pure function of (spec, n).
    inline std::vector<Key> gen_keys(const DistributionSpec &spec, std::uint64_t n)
    {
        validate(spec);
        if (n > spec.range.size())
        {
            throw std::invalid_argument("cannot draw " + std::to_string(n) + " distinct keys from a range of " +
                                        std::to_string(spec.range.size()));
        }
        std::vector<Key> out;
        if (n == 0)
        {
            return out;
        }
        KeySampler sampler(spec);
        Rng rng(spec.seed);
        out.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i)
        {
            out.push_back(sampler.draw_distinct(rng));
        }
        std::sort(out.begin(), out.end());
        return out;
    }
} // namespace nbdt
