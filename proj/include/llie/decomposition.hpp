#pragma once

#include <string>
#include <vector>

#include <torch/torch.h>

#include "llie/image.hpp"

namespace llie {

/// Throws ShapeError unless `x` is (B, channels, H, W).
void require_batch(const torch::Tensor& x, int64_t channels, const std::string& who);

/// Kaiming-normal (fan-in, ReLU gain) conv/linear weights, zero biases.
void kaiming_init(torch::nn::Module& module);

/// Plain convolution stack: stride 1, same padding, ReLU between layers and a
/// sigmoid head. No normalisation layers, so spatial size is preserved and each
/// image is processed independently of its batch mates.
class ConvStackImpl : public torch::nn::Module {
public:
    ConvStackImpl(std::vector<int64_t> widths, int64_t kernel_size, std::string name);

    torch::Tensor forward(const torch::Tensor& x);

    int64_t in_channels() const { return widths_.front(); }
    int64_t out_channels() const { return widths_.back(); }

private:
    std::vector<int64_t> widths_;
    std::string name_;
    torch::nn::ModuleList layers_;
};
TORCH_MODULE(ConvStack);

// N-Net (normalised projection i), R-Net (reflectance R) and L-Net
// (illumination L) are all sigmoid-headed conv stacks; they differ only in
// widths, which come from the manifest.
using NNet = ConvStack;
using RNet = ConvStack;
using LNet = ConvStack;

struct DecompositionResult {
    ImageTensor projection;    // i, (3,H,W)
    ImageTensor reflectance;   // R, (3,H,W)
    ImageTensor illumination;  // L, (1,H,W)
};

}  // namespace llie
