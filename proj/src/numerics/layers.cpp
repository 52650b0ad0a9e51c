#include "lsc/numerics/layers.hpp"

#include <sstream>

namespace lsc {

namespace {

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

}  // namespace

std::string describe(const LayerSpec& layer) {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const layers::Affine& l) { os << "affine(" << l.in << "->" << l.out << ")"; },
                 [&](const layers::Conv2d& l) {
                   os << "conv2d(" << l.in_channels << "->" << l.out_channels << ", k" << l.kernel
                      << " s" << l.stride << " p" << l.padding << ")";
                 },
                 [&](const layers::LeakyRelu& l) { os << "leaky_relu(" << l.slope << ")"; },
                 [&](const layers::Sigmoid&) { os << "sigmoid"; },
                 [&](const layers::Softmax&) { os << "softmax"; },
                 [&](const layers::Flatten&) { os << "flatten"; },
                 [&](const layers::Reshape& l) { os << "reshape" << to_string(l.sample_shape); },
                 [&](const layers::Upsample& l) { os << "upsample(x" << l.factor << ")"; },
                 [&](const layers::ChannelConcat& l) { os << "channel_concat(+" << l.extra_channels << ")"; },
             },
             layer);
  return os.str();
}

Shape infer_shape(const LayerSpec& layer, const Shape& in) {
  auto fail = [&](const std::string& why) -> ShapeError {
    return ShapeError(describe(layer) + ": " + why + " (input " + to_string(in) + ")");
  };
  return std::visit(
      overloaded{
          [&](const layers::Affine& l) -> Shape {
            if (in.size() != 1 || in[0] != l.in) throw fail("expects [" + std::to_string(l.in) + "]");
            return {l.out};
          },
          [&](const layers::Conv2d& l) -> Shape {
            if (in.size() != 3 || in[0] != l.in_channels) {
              throw fail("expects [" + std::to_string(l.in_channels) + ",H,W]");
            }
            if (l.stride == 0 || l.kernel == 0) throw fail("stride and kernel must be positive");
            if (in[1] + 2 * l.padding < l.kernel || in[2] + 2 * l.padding < l.kernel) {
              throw fail("kernel larger than padded input");
            }
            return {l.out_channels, (in[1] + 2 * l.padding - l.kernel) / l.stride + 1,
                    (in[2] + 2 * l.padding - l.kernel) / l.stride + 1};
          },
          [&](const layers::LeakyRelu&) -> Shape { return in; },
          [&](const layers::Sigmoid&) -> Shape { return in; },
          [&](const layers::Softmax&) -> Shape {
            if (in.size() != 1) throw fail("expects a flat vector per sample");
            return in;
          },
          [&](const layers::Flatten&) -> Shape { return {numel(in)}; },
          [&](const layers::Reshape& l) -> Shape {
            if (numel(l.sample_shape) != numel(in)) throw fail("element count differs");
            return l.sample_shape;
          },
          [&](const layers::Upsample& l) -> Shape {
            if (in.size() != 3) throw fail("expects [C,H,W]");
            if (l.factor == 0) throw fail("factor must be positive");
            return {in[0], in[1] * l.factor, in[2] * l.factor};
          },
          [&](const layers::ChannelConcat& l) -> Shape {
            if (in.empty()) throw fail("expects a channel axis");
            Shape out = in;
            out[0] += l.extra_channels;
            return out;
          },
      },
      layer);
}

}  // namespace lsc
