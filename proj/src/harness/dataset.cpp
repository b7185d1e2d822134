#include "tokenmixup/harness/dataset.hpp"

#include <cmath>
#include <numbers>

namespace tkmx::inline TKMX_ABI {

Tensor class_template(std::size_t cls, std::size_t num_classes, std::size_t image_size, std::size_t channels) {
  const double s = static_cast<double>(image_size);
  const double centre = (s - 1.0) / 2.0;
  const double radius = s / 4.0;
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(cls) / static_cast<double>(num_classes);
  const double bx = centre + radius * std::cos(angle), by = centre + radius * std::sin(angle);
  const double width = s / 8.0;
  const double theta = std::numbers::pi * static_cast<double>(cls) / static_cast<double>(num_classes);
  const double period = s / 4.0;

  Tensor img({channels, image_size, image_size});
  for (std::size_t ch = 0; ch < channels; ++ch)
    for (std::size_t y = 0; y < image_size; ++y)
      for (std::size_t x = 0; x < image_size; ++x) {
        const double dx = static_cast<double>(x) - bx, dy = static_cast<double>(y) - by;
        const double blob = std::exp(-(dx * dx + dy * dy) / (2.0 * width * width));
        const double phase = (static_cast<double>(x) * std::cos(theta) + static_cast<double>(y) * std::sin(theta)) / period;
        const double stripes = 0.5 * std::cos(2.0 * std::numbers::pi * phase);
        img.at(ch, y, x) = static_cast<Scalar>(blob + stripes);
      }
  return img;
}

DatasetSplit generate_synthetic_dataset(const RunConfig& cfg) {
  const ModelConfig& m = cfg.model;
  const std::size_t c = m.num_classes, per = cfg.data.samples_per_class, s = m.image_size, ch = m.channels;
  if (c < 2) throw ConfigError("the synthetic dataset needs at least 2 classes");
  const std::size_t n_train = per * 4 / 5, n_val = per - n_train;
  const std::size_t pixels = ch * s * s;

  DatasetSplit split;
  split.train.images = Tensor({n_train * c, ch, s, s});
  split.train.labels = Tensor({n_train * c, c});
  split.val.images = Tensor({n_val * c, ch, s, s});
  split.val.labels = Tensor({n_val * c, c});

  // Classes interleave so every prefix of the split stays balanced.
  for (std::size_t cls = 0; cls < c; ++cls) {
    const Tensor tmpl = class_template(cls, c, s, ch);
    for (std::size_t k = 0; k < per; ++k) {
      CounterRng rng(cfg.seed, RngStream::kData, cls * per + k);
      const bool train = k < n_train;
      Dataset& d = train ? split.train : split.val;
      const std::size_t row = (train ? k : k - n_train) * c + cls;
      for (std::size_t p = 0; p < pixels; ++p) {
        d.images[row * pixels + p] = tmpl[p] + static_cast<Scalar>(cfg.data.noise_std * rng.normal());
      }
      d.labels.at(row, cls) = 1;
    }
  }
  for (Dataset* d : {&split.train, &split.val}) {
    const std::size_t rows = d->labels.dim(0);
    d->classes.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) d->classes[r] = r % c;
  }
  return split;
}

std::pair<Tensor, Tensor> gather_batch(const Dataset& data, const std::vector<std::size_t>& indices) {
  Dims image_dims = data.images.dims();
  image_dims[0] = indices.size();
  Tensor images(image_dims), labels({indices.size(), data.labels.dim(1)});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    images.set_slice0(i, data.images.slice0(indices[i]));
    labels.set_slice0(i, data.labels.slice0(indices[i]));
  }
  return {std::move(images), std::move(labels)};
}

}  // namespace tkmx::inline TKMX_ABI
