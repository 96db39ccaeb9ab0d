#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace coreg {

enum class Label : std::uint8_t { Absent = 0, Present = 1, Unknown = 2 };

/// n x C grid of labels, row-major like Matrix.
class LabelMatrix {
public:
    LabelMatrix() = default;
    LabelMatrix(std::size_t rows, std::size_t cols, Label fill = Label::Unknown)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    Label& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    Label operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    bool row_known(std::size_t r) const noexcept {
        for (std::size_t c = 0; c < cols_; ++c)
            if ((*this)(r, c) == Label::Unknown) return false;
        return true;
    }

    bool operator==(const LabelMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Label> data_;
};

}  // namespace coreg
