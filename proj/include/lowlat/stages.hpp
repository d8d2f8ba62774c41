#pragma once

#include <memory>
#include <vector>

#include <Eigen/Core>

#include "lowlat/archgraph.hpp"
#include "lowlat/tensor.hpp"

// Streaming building blocks with cached padding. Every stage is start
// anchored: after reset() its history is zeros, so block-wise processing
// matches a left-zero-padded convolution over the whole signal.
namespace lowlat::stage {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Stage {
public:
    virtual ~Stage() = default;
    virtual void reset() = 0;
    virtual void process(const TensorBlock& in, TensorBlock& out) = 0;
    virtual std::unique_ptr<Stage> clone() const = 0;
    virtual int channels_in() const = 0;
    virtual int channels_out() const = 0;
    // frames out per frame in is up / down
    virtual int up() const { return 1; }
    virtual int down() const { return 1; }
};

// y[n] = b + sum_j W_j x[n * stride - delay - j * dilation]
// weight is cout x cin x kernel. Taps that are zero for every channel pair are
// skipped. The first mask_frames outputs are forced to zero.
class Conv : public Stage {
public:
    Conv(int cin, int cout, int kernel, int stride, int dilation, int delay, const float* weight,
         const float* bias, long mask_frames = 0);

    void reset() override;
    void process(const TensorBlock& in, TensorBlock& out) override;
    std::unique_ptr<Stage> clone() const override { return std::make_unique<Conv>(*this); }
    int channels_in() const override { return cin_; }
    int channels_out() const override { return cout_; }
    int down() const override { return stride_; }
    int history() const { return history_; }
    int active_taps() const { return static_cast<int>(taps_.size()); }

private:
    int cin_, cout_, kernel_, stride_, dilation_, delay_;
    long mask_frames_;
    long emitted_ = 0;
    int history_;
    std::vector<int> taps_;
    RowMatrix w_; // cout x (taps * cin)
    Eigen::VectorXf b_;
    RowMatrix hist_;
    RowMatrix ext_;
    RowMatrix cols_;
};

// y[m * stride + j + delay] += W_j x[m], overlap-add with a persistent tail.
// weight is cin x cout x kernel.
class TransposedConv : public Stage {
public:
    TransposedConv(int cin, int cout, int kernel, int stride, int delay, const float* weight,
                   const float* bias, long mask_frames = 0);

    void reset() override;
    void process(const TensorBlock& in, TensorBlock& out) override;
    std::unique_ptr<Stage> clone() const override { return std::make_unique<TransposedConv>(*this); }
    int channels_in() const override { return cin_; }
    int channels_out() const override { return cout_; }
    int up() const override { return stride_; }
    int tail_length() const { return tail_len_; }

private:
    int cin_, cout_, kernel_, stride_, delay_;
    long mask_frames_;
    long emitted_ = 0;
    int tail_len_;
    std::vector<int> taps_;
    RowMatrix w_; // (taps * cout) x cin
    Eigen::VectorXf b_;
    RowMatrix tail_;
    RowMatrix z_;
    RowMatrix acc_;
};

class Activation : public Stage {
public:
    Activation(ActivationFn fn, int channels) : fn_(fn), channels_(channels) {}
    void reset() override {}
    void process(const TensorBlock& in, TensorBlock& out) override;
    std::unique_ptr<Stage> clone() const override { return std::make_unique<Activation>(*this); }
    int channels_in() const override { return channels_; }
    int channels_out() const override { return channels_; }

    static void apply(ActivationFn fn, float* x, size_t n);

private:
    ActivationFn fn_;
    int channels_;
};

class DelayLine : public Stage {
public:
    DelayLine(int channels, int delay);
    void reset() override;
    void process(const TensorBlock& in, TensorBlock& out) override;
    std::unique_ptr<Stage> clone() const override { return std::make_unique<DelayLine>(*this); }
    int channels_in() const override { return channels_; }
    int channels_out() const override { return channels_; }

private:
    int channels_, delay_;
    RowMatrix hist_;
    RowMatrix ext_;
};

// act -> dilated conv -> act -> conv -> + skip, repeated per dilation.
class Residual : public Stage {
public:
    struct Sublayer {
        Conv dilated;
        Conv pointwise;
        DelayLine skip;
    };

    Residual(int channels, std::vector<Sublayer> subs) : channels_(channels), subs_(std::move(subs)) {}
    void reset() override;
    void process(const TensorBlock& in, TensorBlock& out) override;
    std::unique_ptr<Stage> clone() const override { return std::make_unique<Residual>(*this); }
    int channels_in() const override { return channels_; }
    int channels_out() const override { return channels_; }

private:
    int channels_;
    std::vector<Sublayer> subs_;
    TensorBlock a_, t1_, t2_, s_, cur_;
};

} // namespace lowlat::stage
