#include "lowlat/stages.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "lowlat/error.hpp"

namespace lowlat::stage {

namespace {

void mask_leading(TensorBlock& out, long& emitted, long mask_frames)
{
    if (emitted < mask_frames) {
        long n = std::min<long>(mask_frames - emitted, out.frames);
        for (int c = 0; c < out.channels; ++c)
            std::fill(out.row(c), out.row(c) + n, 0.0f);
    }
    emitted += out.frames;
}

} // namespace

Conv::Conv(int cin, int cout, int kernel, int stride, int dilation, int delay, const float* weight,
           const float* bias, long mask_frames)
    : cin_(cin), cout_(cout), kernel_(kernel), stride_(stride), dilation_(dilation), delay_(delay),
      mask_frames_(mask_frames)
{
    if (cin < 1 || cout < 1 || kernel < 1 || stride < 1 || dilation < 1 || delay < 0)
        throw ValidationError("conv stage: bad geometry");
    history_ = delay_ + (kernel_ - 1) * dilation_;
    for (int j = 0; j < kernel_; ++j) {
        bool nz = false;
        for (int o = 0; o < cout_ && !nz; ++o)
            for (int i = 0; i < cin_ && !nz; ++i)
                nz = weight[(static_cast<size_t>(o) * cin_ + i) * kernel_ + j] != 0.0f;
        if (nz)
            taps_.push_back(j);
    }
    w_ = RowMatrix::Zero(cout_, static_cast<long>(taps_.size()) * cin_);
    for (size_t t = 0; t < taps_.size(); ++t)
        for (int o = 0; o < cout_; ++o)
            for (int i = 0; i < cin_; ++i)
                w_(o, static_cast<long>(t) * cin_ + i) = weight[(static_cast<size_t>(o) * cin_ + i) * kernel_ + taps_[t]];
    b_ = Eigen::VectorXf::Zero(cout_);
    if (bias)
        for (int o = 0; o < cout_; ++o)
            b_(o) = bias[o];
    hist_ = RowMatrix::Zero(cin_, history_);
}

void Conv::reset()
{
    hist_.setZero();
    emitted_ = 0;
}

void Conv::process(const TensorBlock& in, TensorBlock& out)
{
    if (in.channels != cin_)
        throw ShapeError("conv stage: channel mismatch");
    if (in.frames % stride_ != 0)
        throw InfeasibleBlockError("conv stage: block not a multiple of the stride");
    const int B = in.frames;
    const int nout = B / stride_;
    const int H = history_;
    ext_.resize(cin_, H + B);
    for (int c = 0; c < cin_; ++c) {
        if (H > 0)
            std::memcpy(&ext_(c, 0), &hist_(c, 0), sizeof(float) * H);
        std::memcpy(&ext_(c, H), in.row(c), sizeof(float) * B);
    }
    out.resize(cout_, nout);
    Eigen::Map<RowMatrix> y(out.data.data(), cout_, nout);
    if (taps_.empty()) {
        y.setZero();
    } else {
        cols_.resize(static_cast<long>(taps_.size()) * cin_, nout);
        for (size_t t = 0; t < taps_.size(); ++t) {
            const int off = H - delay_ - taps_[t] * dilation_;
            for (int c = 0; c < cin_; ++c) {
                const float* src = &ext_(c, off);
                float* dst = &cols_(static_cast<long>(t) * cin_ + c, 0);
                if (stride_ == 1) {
                    std::memcpy(dst, src, sizeof(float) * nout);
                } else {
                    for (int n = 0; n < nout; ++n)
                        dst[n] = src[static_cast<size_t>(n) * stride_];
                }
            }
        }
        y.noalias() = w_ * cols_;
    }
    y.colwise() += b_;
    if (H > 0)
        for (int c = 0; c < cin_; ++c)
            std::memcpy(&hist_(c, 0), &ext_(c, B), sizeof(float) * H);
    mask_leading(out, emitted_, mask_frames_);
}

TransposedConv::TransposedConv(int cin, int cout, int kernel, int stride, int delay, const float* weight,
                               const float* bias, long mask_frames)
    : cin_(cin), cout_(cout), kernel_(kernel), stride_(stride), delay_(delay), mask_frames_(mask_frames)
{
    if (cin < 1 || cout < 1 || kernel < 1 || stride < 1 || delay < 0)
        throw ValidationError("transposed conv stage: bad geometry");
    tail_len_ = std::max(0, kernel_ + delay_ - stride_);
    for (int j = 0; j < kernel_; ++j) {
        bool nz = false;
        for (int i = 0; i < cin_ && !nz; ++i)
            for (int o = 0; o < cout_ && !nz; ++o)
                nz = weight[(static_cast<size_t>(i) * cout_ + o) * kernel_ + j] != 0.0f;
        if (nz)
            taps_.push_back(j);
    }
    w_ = RowMatrix::Zero(static_cast<long>(taps_.size()) * cout_, cin_);
    for (size_t t = 0; t < taps_.size(); ++t)
        for (int o = 0; o < cout_; ++o)
            for (int i = 0; i < cin_; ++i)
                w_(static_cast<long>(t) * cout_ + o, i) = weight[(static_cast<size_t>(i) * cout_ + o) * kernel_ + taps_[t]];
    b_ = Eigen::VectorXf::Zero(cout_);
    if (bias)
        for (int o = 0; o < cout_; ++o)
            b_(o) = bias[o];
    tail_ = RowMatrix::Zero(cout_, tail_len_);
}

void TransposedConv::reset()
{
    tail_.setZero();
    emitted_ = 0;
}

void TransposedConv::process(const TensorBlock& in, TensorBlock& out)
{
    if (in.channels != cin_)
        throw ShapeError("transposed conv stage: channel mismatch");
    const int B = in.frames;
    const int nout = B * stride_;
    const int T = tail_len_;
    acc_.setZero(cout_, nout + T);
    if (T > 0)
        acc_.leftCols(T) += tail_;
    if (!taps_.empty()) {
        Eigen::Map<const RowMatrix> x(in.data.data(), cin_, B);
        z_.noalias() = w_ * x;
        for (size_t t = 0; t < taps_.size(); ++t) {
            const int shift = taps_[t] + delay_;
            for (int o = 0; o < cout_; ++o) {
                const float* zr = &z_(static_cast<long>(t) * cout_ + o, 0);
                float* ar = &acc_(o, shift);
                if (stride_ == 1) {
                    for (int m = 0; m < B; ++m)
                        ar[m] += zr[m];
                } else {
                    for (int m = 0; m < B; ++m)
                        ar[static_cast<size_t>(m) * stride_] += zr[m];
                }
            }
        }
    }
    out.resize(cout_, nout);
    for (int o = 0; o < cout_; ++o) {
        const float bo = b_(o);
        float* dst = out.row(o);
        const float* src = &acc_(o, 0);
        for (int n = 0; n < nout; ++n)
            dst[n] = src[n] + bo;
    }
    if (T > 0)
        tail_ = acc_.rightCols(T);
    mask_leading(out, emitted_, mask_frames_);
}

void Activation::apply(ActivationFn fn, float* x, size_t n)
{
    if (fn == ActivationFn::Tanh) {
        for (size_t i = 0; i < n; ++i)
            x[i] = std::tanh(x[i]);
    } else {
        const float slope = static_cast<float>(kLeakySlope);
        for (size_t i = 0; i < n; ++i)
            x[i] = x[i] > 0.0f ? x[i] : slope * x[i];
    }
}

void Activation::process(const TensorBlock& in, TensorBlock& out)
{
    if (in.channels != channels_)
        throw ShapeError("activation stage: channel mismatch");
    out = in;
    apply(fn_, out.data.data(), out.data.size());
}

DelayLine::DelayLine(int channels, int delay) : channels_(channels), delay_(delay)
{
    hist_ = RowMatrix::Zero(channels_, delay_);
}

void DelayLine::reset() { hist_.setZero(); }

void DelayLine::process(const TensorBlock& in, TensorBlock& out)
{
    if (delay_ == 0) {
        out = in;
        return;
    }
    const int B = in.frames;
    ext_.resize(channels_, delay_ + B);
    out.resize(channels_, B);
    for (int c = 0; c < channels_; ++c) {
        std::memcpy(&ext_(c, 0), &hist_(c, 0), sizeof(float) * delay_);
        std::memcpy(&ext_(c, delay_), in.row(c), sizeof(float) * B);
        std::memcpy(out.row(c), &ext_(c, 0), sizeof(float) * B);
        std::memcpy(&hist_(c, 0), &ext_(c, B), sizeof(float) * delay_);
    }
}

void Residual::reset()
{
    for (auto& s : subs_) {
        s.dilated.reset();
        s.pointwise.reset();
        s.skip.reset();
    }
}

void Residual::process(const TensorBlock& in, TensorBlock& out)
{
    cur_ = in;
    for (auto& s : subs_) {
        a_ = cur_;
        Activation::apply(ActivationFn::LeakyRelu, a_.data.data(), a_.data.size());
        s.dilated.process(a_, t1_);
        Activation::apply(ActivationFn::LeakyRelu, t1_.data.data(), t1_.data.size());
        s.pointwise.process(t1_, t2_);
        s.skip.process(cur_, s_);
        for (size_t i = 0; i < s_.data.size(); ++i)
            s_.data[i] += t2_.data[i];
        std::swap(cur_, s_);
    }
    out = cur_;
}

} // namespace lowlat::stage
