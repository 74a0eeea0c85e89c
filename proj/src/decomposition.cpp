#include "llie/decomposition.hpp"

#include "llie/error.hpp"

namespace llie {

void require_batch(const torch::Tensor& x, int64_t channels, const std::string& who) {
    if (!x.defined() || x.dim() != 4) fail(ErrorKind::ShapeError, who + ": expected a (B,C,H,W) tensor");
    if (x.size(1) != channels) {
        fail(ErrorKind::ShapeError, who + ": expected " + std::to_string(channels) + " channels, got " +
                                        std::to_string(x.size(1)));
    }
}

void kaiming_init(torch::nn::Module& module) {
    torch::NoGradGuard no_grad;
    for (auto& m : module.modules(/*include_self=*/false)) {
        if (auto* conv = m->as<torch::nn::Conv2d>()) {
            torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanIn, torch::kReLU);
            if (conv->bias.defined()) conv->bias.zero_();
        } else if (auto* lin = m->as<torch::nn::Linear>()) {
            torch::nn::init::kaiming_normal_(lin->weight, 0.0, torch::kFanIn, torch::kReLU);
            if (lin->bias.defined()) lin->bias.zero_();
        }
    }
}

ConvStackImpl::ConvStackImpl(std::vector<int64_t> widths, int64_t kernel_size, std::string name)
    : widths_(std::move(widths)), name_(std::move(name)) {
    if (widths_.size() < 2) fail(ErrorKind::InvalidInput, name_ + ": need at least one layer");
    for (size_t k = 0; k + 1 < widths_.size(); ++k) {
        layers_->push_back(torch::nn::Conv2d(
            torch::nn::Conv2dOptions(widths_[k], widths_[k + 1], kernel_size).stride(1).padding(kernel_size / 2)));
    }
    register_module("layers", layers_);
    kaiming_init(*this);
}

torch::Tensor ConvStackImpl::forward(const torch::Tensor& x) {
    require_batch(x, in_channels(), name_);
    auto h = x;
    const size_t last = layers_->size() - 1;
    for (size_t k = 0; k < layers_->size(); ++k) {
        h = layers_[k]->as<torch::nn::Conv2d>()->forward(h);
        h = k == last ? torch::sigmoid(h) : torch::relu(h);
    }
    return h;
}

}  // namespace llie
