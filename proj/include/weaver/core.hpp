#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace weaver
{
    template <class Scalar>
    using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    template <class Scalar>
    using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    template <class Scalar>
    using RowVecX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

    using matXd = MatX<double>;
    using vecXd = VecX<double>;
    using rowXd = RowVecX<double>;

    class Error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Parse failure that carries the 1-based line it occurred on (0 when not line-oriented).
    class ParseError : public Error
    {
    public:
        ParseError(std::size_t line, const std::string& what)
            : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line)
        {
        }
        std::size_t line() const noexcept { return line_; }

    private:
        std::size_t line_;
    };

    inline bool is_perfect_square(std::size_t n, std::size_t* root = nullptr)
    {
        auto r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
        while (r * r > n)
            --r;
        while ((r + 1) * (r + 1) <= n)
            ++r;
        if (root)
            *root = r;
        return r * r == n;
    }

    template <class Derived>
    bool all_finite(const Eigen::DenseBase<Derived>& m)
    {
        return m.allFinite();
    }

    inline std::uint64_t splitmix64(std::uint64_t x)
    {
        x += 0x9E3779B97F4A7C15ull;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return x ^ (x >> 31);
    }

    inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt)
    {
        return splitmix64(seed ^ splitmix64(salt));
    }

    std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull);
    std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ull);
}
