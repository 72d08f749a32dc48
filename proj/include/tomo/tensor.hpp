#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "tomo/errors.hpp"

namespace tomo {

// Dense row-major 2D array. Backing store for image grids, sinograms and
// masks. float is the working precision; double is the verification mode.
template <typename T>
class Tensor2 {
public:
    Tensor2() = default;

    Tensor2(int rows, int cols, T fill = T{})
        : rows_(rows),
          cols_(cols),
          data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill) {
        if (rows < 0 || cols < 0) throw ValidationError("Tensor2: negative dimensions");
    }

    static Tensor2 from_data(int rows, int cols, std::vector<T> data) {
        if (rows < 0 || cols < 0) throw ValidationError("Tensor2: negative dimensions");
        if (data.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
            throw ValidationError("Tensor2: data length != rows*cols");
        Tensor2 t;
        t.rows_ = rows;
        t.cols_ = cols;
        t.data_ = std::move(data);
        return t;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator()(int r, int c) { return data_[index(r, c)]; }
    const T& operator()(int r, int c) const { return data_[index(r, c)]; }

    bool same_shape(const Tensor2& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    void fill(T v) {
        for (T& x : data_) x = v;
    }

    template <typename U>
    Tensor2<U> cast() const {
        std::vector<U> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return Tensor2<U>::from_data(rows_, cols_, std::move(out));
    }

    friend bool operator==(const Tensor2&, const Tensor2&) = default;

private:
    std::size_t index(int r, int c) const {
        return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) +
               static_cast<std::size_t>(c);
    }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<T> data_;
};

using Tensor2f = Tensor2<float>;
using Tensor2d = Tensor2<double>;

}  // namespace tomo
