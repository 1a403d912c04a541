#pragma once

#include <vector>

#include "beacon/nn/layers.hpp"

namespace beacon::nn {

// Stacked (optionally bidirectional) LSTM over N x T x F input with zero
// initial state. Output is N x T x (directions * hidden); layer l > 0 consumes
// the concatenated directions of layer l - 1. Gate order in the packed weight
// rows is i, f, g, o.
template <typename T>
class Lstm final : public Layer<T> {
public:
    Lstm(std::size_t input_size, std::size_t hidden, std::size_t layers, bool bidirectional);

    std::string kind() const override { return "lstm"; }
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    void collect(const std::string& prefix, std::vector<ParamRef<T>>& params, std::vector<BufferRef<T>>& buffers) override;
    // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) per weight matrix; biases zero.
    void init(Rng& rng) override;

    std::size_t hidden() const noexcept { return hidden_; }
    std::size_t directions() const noexcept { return bidirectional_ ? 2 : 1; }

    struct Cell {
        Tensor<T> w_ih, w_hh, b_ih, b_hh;      // 4H x in, 4H x H, 4H, 4H
        Tensor<T> gw_ih, gw_hh, gb_ih, gb_hh;
    };
    Cell& cell(std::size_t layer, std::size_t direction) { return cells_.at(layer * directions() + direction); }

private:
    struct Trace {
        RowMatrix<T> input;                    // N*T x in, the layer input
        std::vector<RowMatrix<T>> gates;       // per step, N x 4H, activated
        std::vector<RowMatrix<T>> c, h;        // per step, N x H
    };

    void run_direction(const Cell& cell, const RowMatrix<T>& input, std::size_t n, std::size_t steps, bool reverse,
                       Trace& trace) const;
    RowMatrix<T> backprop_direction(Cell& cell, const Trace& trace, const RowMatrix<T>& grad_h, std::size_t n,
                                    std::size_t steps, bool reverse) const;

    std::size_t input_size_, hidden_, layers_;
    bool bidirectional_;
    std::vector<Cell> cells_;
    std::vector<Trace> traces_;                // layer * directions + direction
    std::size_t cached_n_ = 0, cached_t_ = 0;
    bool have_cache_ = false;
};

}  // namespace beacon::nn
