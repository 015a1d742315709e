#pragma once

#include <json.hpp>

#include <Eigen/Dense>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "ssc/classifier.hpp"
#include "ssc/config.hpp"
#include "ssc/core.hpp"
#include "ssc/layers.hpp"

namespace ssc {

/// The trainable pieces of the pipeline: mirrored conv autoencoder, softmax
/// head, and the self-expression matrix. The classifier may be empty (before
/// the full stage) and C may be empty (pure autoencoder checkpoints).
struct SscModel {
  std::vector<std::size_t> input_shape;  // per-sample shape
  std::vector<int> conv_channels, conv_kernels, conv_strides;
  Padding padding = Padding::kSame;
  std::size_t latent_dim = 0;

  Network encoder;
  Network decoder;
  Classifier classifier;
  Eigen::MatrixXd C;

  std::vector<ParamRef> autoencoder_params() {
    std::vector<ParamRef> out;
    for (const ParamView& p : encoder.params()) {
      ParamRef r = to_param_ref(p);
      r.name = "enc." + r.name;
      out.push_back(r);
    }
    for (const ParamView& p : decoder.params()) {
      ParamRef r = to_param_ref(p);
      r.name = "dec." + r.name;
      out.push_back(r);
    }
    return out;
  }
};

inline std::vector<std::size_t> per_sample_shape(const Tensor& batch) {
  require(batch.rank() >= 2, "per_sample_shape: need batched tensor");
  return std::vector<std::size_t>(batch.shape().begin() + 1, batch.shape().end());
}

/// Builds the mirrored autoencoder for the configured architecture. An empty
/// conv list yields a flatten-only encoder and an inverse-reshape decoder,
/// the shallow pipeline used for feature-vector data. Each decoder stage is
/// the transposed twin of the matching encoder conv with the conv's input
/// size as its explicit output size, so decoder(encoder(x)) always has the
/// shape of x.
inline SscModel build_model(const std::vector<std::size_t>& sample_shape,
                            const std::vector<int>& channels, const std::vector<int>& kernels,
                            const std::vector<int>& strides, Padding padding, std::uint64_t seed) {
  require(channels.size() == kernels.size() && channels.size() == strides.size(),
          "build_model: conv spec lists must have equal length");
  require(!sample_shape.empty(), "build_model: empty sample shape");

  SscModel m;
  m.input_shape = sample_shape;
  m.conv_channels = channels;
  m.conv_kernels = kernels;
  m.conv_strides = strides;
  m.padding = padding;

  Rng enc_rng(Rng::derive(seed, 0xE5C0DEull));
  Rng dec_rng(Rng::derive(seed, 0xDE0C0DEull));

  if (channels.empty()) {
    m.encoder.add(std::make_unique<Flatten>());
    std::size_t flat = 1;
    for (std::size_t d : sample_shape) flat *= d;
    m.latent_dim = flat;
    if (sample_shape.size() > 1) m.decoder.add(std::make_unique<Reshape>(sample_shape));
    return m;
  }

  require(sample_shape.size() == 3, "build_model: conv architecture needs [C,H,W] samples");
  struct Stage {
    std::size_t c, h, w;
  };
  std::vector<Stage> inputs;
  std::size_t c = sample_shape[0], h = sample_shape[1], w = sample_shape[2];
  for (std::size_t i = 0; i < channels.size(); ++i) {
    require(channels[i] >= 1 && kernels[i] >= 1 && strides[i] >= 1,
            "build_model: conv spec entries must be >= 1");
    inputs.push_back({c, h, w});
    m.encoder.add(std::make_unique<Conv2d>(c, static_cast<std::size_t>(channels[i]),
                                           static_cast<std::size_t>(kernels[i]),
                                           static_cast<std::size_t>(strides[i]), padding,
                                           enc_rng));
    m.encoder.add(std::make_unique<Relu>());
    const ConvGeom g = make_conv_geom(
        static_cast<std::ptrdiff_t>(h), static_cast<std::ptrdiff_t>(w),
        static_cast<std::ptrdiff_t>(kernels[i]), static_cast<std::ptrdiff_t>(kernels[i]),
        static_cast<std::ptrdiff_t>(strides[i]), padding);
    c = static_cast<std::size_t>(channels[i]);
    h = static_cast<std::size_t>(g.out_h);
    w = static_cast<std::size_t>(g.out_w);
  }
  m.encoder.add(std::make_unique<Flatten>());
  m.latent_dim = c * h * w;

  m.decoder.add(std::make_unique<Reshape>(std::vector<std::size_t>{c, h, w}));
  for (std::size_t i = channels.size(); i-- > 0;) {
    m.decoder.add(std::make_unique<Deconv2d>(
        static_cast<std::size_t>(channels[i]), inputs[i].c, static_cast<std::size_t>(kernels[i]),
        static_cast<std::size_t>(strides[i]), padding, inputs[i].h, inputs[i].w, dec_rng));
    if (i > 0) m.decoder.add(std::make_unique<Relu>());
  }
  return m;
}

inline SscModel build_model(const ExperimentConfig& cfg,
                            const std::vector<std::size_t>& sample_shape) {
  return build_model(sample_shape, cfg.conv_channels, cfg.conv_kernels, cfg.conv_strides,
                     cfg.conv_padding, Rng::derive(cfg.seed, 0xA0C4ull));
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace detail {

constexpr char kModelMagic[8] = {'S', 'S', 'C', 'N', 'E', 'T', '0', '1'};
constexpr char kCMagic[8] = {'S', 'S', 'C', 'C', 'M', 'A', 'T', '1'};

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {char(v & 0xFF), char((v >> 8) & 0xFF), char((v >> 16) & 0xFF), char(v >> 24)};
  out.write(b, 4);
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  require(in.good(), "checkpoint: truncated");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

}  // namespace detail

/// Model checkpoint: magic, JSON architecture manifest, then the parameter
/// blocks as raw f64 blobs in manifest order. C is stored separately.
inline void save_model(const std::string& path, SscModel& m) {
  nlohmann::json manifest;
  manifest["format"] = 1;
  manifest["version"] = kVersion;
  manifest["input_shape"] = m.input_shape;
  manifest["conv_channels"] = m.conv_channels;
  manifest["conv_kernels"] = m.conv_kernels;
  manifest["conv_strides"] = m.conv_strides;
  manifest["padding"] = padding_name(m.padding);
  manifest["latent_dim"] = m.latent_dim;
  manifest["classifier_k"] = m.classifier.empty() ? 0 : m.classifier.k();

  std::vector<ParamRef> blocks = m.autoencoder_params();
  if (!m.classifier.empty())
    for (const ParamRef& r : m.classifier.params()) blocks.push_back(r);
  nlohmann::json jblocks = nlohmann::json::array();
  for (const ParamRef& b : blocks) jblocks.push_back({{"name", b.name}, {"count", b.count}});
  manifest["blocks"] = jblocks;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), cat("cannot open ", path, " for writing"));
  out.write(detail::kModelMagic, 8);
  const std::string mtext = manifest.dump();
  detail::write_u32(out, static_cast<std::uint32_t>(mtext.size()));
  out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (const ParamRef& b : blocks)
    out.write(reinterpret_cast<const char*>(b.value),
              static_cast<std::streamsize>(b.count * sizeof(double)));
  require(out.good(), cat("short write on ", path));
}

inline SscModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), cat("cannot open ", path));
  char magic[8];
  in.read(magic, 8);
  require(in.good() && std::equal(magic, magic + 8, detail::kModelMagic),
          cat("checkpoint ", path, ": bad magic"));
  const std::uint32_t mlen = detail::read_u32(in);
  std::string mtext(mlen, '\0');
  in.read(mtext.data(), mlen);
  require(in.good(), cat("checkpoint ", path, ": truncated manifest"));

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mtext);
  } catch (const std::exception& e) {
    fail("checkpoint ", path, ": bad manifest: ", e.what());
  }
  require(manifest.value("format", 0) == 1, cat("checkpoint ", path, ": unsupported format"));

  SscModel m = build_model(manifest.at("input_shape").get<std::vector<std::size_t>>(),
                           manifest.at("conv_channels").get<std::vector<int>>(),
                           manifest.at("conv_kernels").get<std::vector<int>>(),
                           manifest.at("conv_strides").get<std::vector<int>>(),
                           manifest.at("padding").get<std::string>() == "same" ? Padding::kSame
                                                                               : Padding::kValid,
                           0);
  require(m.latent_dim == manifest.at("latent_dim").get<std::size_t>(),
          cat("checkpoint ", path, ": latent dim mismatch"));
  const int clf_k = manifest.at("classifier_k").get<int>();
  if (clf_k > 0) {
    Rng rng(0);
    m.classifier = Classifier(clf_k, static_cast<Eigen::Index>(m.latent_dim), rng);
  }

  std::vector<ParamRef> blocks = m.autoencoder_params();
  if (!m.classifier.empty())
    for (const ParamRef& r : m.classifier.params()) blocks.push_back(r);
  const auto& jblocks = manifest.at("blocks");
  require(jblocks.size() == blocks.size(), cat("checkpoint ", path, ": block count mismatch"));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    require(jblocks[i].at("name").get<std::string>() == blocks[i].name &&
                jblocks[i].at("count").get<std::size_t>() == blocks[i].count,
            cat("checkpoint ", path, ": block ", i, " mismatch (", blocks[i].name, ")"));
    in.read(reinterpret_cast<char*>(blocks[i].value),
            static_cast<std::streamsize>(blocks[i].count * sizeof(double)));
    require(in.good(), cat("checkpoint ", path, ": truncated block ", blocks[i].name));
  }
  return m;
}

/// Representation-matrix checkpoint: magic, dimensions, row-major f64.
inline void save_c_matrix(const std::string& path, const Eigen::MatrixXd& C) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), cat("cannot open ", path, " for writing"));
  out.write(detail::kCMagic, 8);
  detail::write_u32(out, static_cast<std::uint32_t>(C.rows()));
  detail::write_u32(out, static_cast<std::uint32_t>(C.cols()));
  for (Eigen::Index i = 0; i < C.rows(); ++i)
    for (Eigen::Index j = 0; j < C.cols(); ++j) {
      const double v = C(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  require(out.good(), cat("short write on ", path));
}

inline Eigen::MatrixXd load_c_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), cat("cannot open ", path));
  char magic[8];
  in.read(magic, 8);
  require(in.good() && std::equal(magic, magic + 8, detail::kCMagic),
          cat("c-matrix ", path, ": bad magic"));
  const std::uint32_t rows = detail::read_u32(in);
  const std::uint32_t cols = detail::read_u32(in);
  Eigen::MatrixXd C(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) {
      double v;
      in.read(reinterpret_cast<char*>(&v), sizeof v);
      require(in.good(), cat("c-matrix ", path, ": truncated"));
      C(i, j) = v;
    }
  return C;
}

inline void export_c_csv(const std::string& path, const Eigen::MatrixXd& C) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), cat("cannot open ", path, " for writing"));
  for (Eigen::Index i = 0; i < C.rows(); ++i) {
    for (Eigen::Index j = 0; j < C.cols(); ++j) {
      if (j) out << ',';
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", C(i, j));
      out << buf;
    }
    out << '\n';
  }
  require(out.good(), cat("short write on ", path));
}

}  // namespace ssc
