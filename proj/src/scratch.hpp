#pragma once

#include <boost/container/small_vector.hpp>

#include <cstddef>
#include <span>

namespace sfk::detail
{

// Small per-call work vector that avoids the heap for typical model sizes.
class Scratch
{
public:
    explicit Scratch(std::size_t n, double value = 0.0) : data_(n, value) {}

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }
    std::size_t size() const noexcept { return data_.size(); }

    operator std::span<double>() noexcept { return {data_.data(), data_.size()}; }
    operator std::span<const double>() const noexcept { return {data_.data(), data_.size()}; }

private:
    boost::container::small_vector<double, 8> data_;
};

} // namespace sfk::detail
