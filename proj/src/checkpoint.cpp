#include "capsnet/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "capsnet/config.hpp"

namespace capsnet {

namespace {

constexpr char kMagic[4] = {'C', 'A', 'P', 'S'};
constexpr std::uint32_t kVersion = 1;

// x86-64 is little-endian; payloads are written as raw bytes.
template <typename V>
void write_pod(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename V>
V read_pod(std::istream& in, const char* what) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError(std::string("checkpoint truncated while reading ") + what);
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const char* what) {
  auto len = read_pod<std::uint32_t>(in, what);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw FormatError(std::string("checkpoint truncated while reading ") + what);
  return s;
}

void write_tensor(std::ostream& out, const std::string& name, const Tensor<float>& t) {
  write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_pod<std::uint8_t>(out, 0);  // dtype 0 = f32
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(t.ndim()));
  for (int d : t.shape) write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  out.write(reinterpret_cast<const char*>(t.ptr()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
}

std::pair<std::string, Tensor<float>> read_tensor(std::istream& in) {
  auto name_len = read_pod<std::uint16_t>(in, "tensor name length");
  std::string name(name_len, '\0');
  in.read(name.data(), name_len);
  if (!in) throw FormatError("checkpoint truncated while reading tensor name");
  auto dtype = read_pod<std::uint8_t>(in, "tensor dtype");
  if (dtype != 0) throw FormatError("unsupported tensor dtype " + std::to_string(int(dtype)));
  auto ndim = read_pod<std::uint8_t>(in, "tensor rank");
  Shape shape;
  for (int i = 0; i < int(ndim); ++i)
    shape.push_back(static_cast<int>(read_pod<std::uint32_t>(in, "tensor dim")));
  Tensor<float> t = Tensor<float>::zeros(shape);
  in.read(reinterpret_cast<char*>(t.ptr()),
          static_cast<std::streamsize>(t.size() * sizeof(float)));
  if (!in) throw FormatError("checkpoint truncated while reading tensor payload");
  return {std::move(name), std::move(t)};
}

}  // namespace

void save_checkpoint(const TrainingSnapshot& snap, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write checkpoint " + path);
  out.write(kMagic, 4);
  write_pod<std::uint32_t>(out, kVersion);
  write_string(out, serialize_model_config(snap.model.cfg));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(snap.epoch));
  write_string(out, snap.rng_state);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(snap.history.size()));
  for (const auto& m : snap.history) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.epoch));
    write_pod<double>(out, m.margin_loss);
    write_pod<double>(out, m.recon_loss);
    write_pod<double>(out, m.total_loss);
    write_pod<double>(out, m.val_accuracy);
  }
  write_pod<std::uint8_t>(out, snap.has_adam ? 1 : 0);
  write_pod<std::uint64_t>(out, snap.adam.step);
  write_pod<double>(out, snap.adam.lr);

  std::uint32_t n_tensors = static_cast<std::uint32_t>(snap.model.param_tensors.size());
  if (snap.has_adam) n_tensors *= 3;
  write_pod<std::uint32_t>(out, n_tensors);
  for (std::size_t i = 0; i < snap.model.param_tensors.size(); ++i)
    write_tensor(out, snap.model.param_names[i], snap.model.param_tensors[i]);
  if (snap.has_adam) {
    for (std::size_t i = 0; i < snap.model.param_tensors.size(); ++i) {
      Tensor<float> m(snap.model.param_tensors[i].shape,
                      std::make_shared<std::vector<float>>(snap.adam.m[i]));
      write_tensor(out, "adam.m." + snap.model.param_names[i], m);
    }
    for (std::size_t i = 0; i < snap.model.param_tensors.size(); ++i) {
      Tensor<float> v(snap.model.param_tensors[i].shape,
                      std::make_shared<std::vector<float>>(snap.adam.v[i]));
      write_tensor(out, "adam.v." + snap.model.param_names[i], v);
    }
  }
  if (!out) throw FormatError("write failure on checkpoint " + path);
}

TrainingSnapshot load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(path + ": bad checkpoint magic");
  auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kVersion)
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));

  TrainingSnapshot snap;
  snap.model.cfg = parse_model_config(read_string(in, "model config"));
  snap.epoch = static_cast<int>(read_pod<std::uint32_t>(in, "epoch"));
  snap.rng_state = read_string(in, "rng state");
  auto n_metrics = read_pod<std::uint32_t>(in, "metric count");
  for (std::uint32_t i = 0; i < n_metrics; ++i) {
    MetricRecord m;
    m.epoch = static_cast<int>(read_pod<std::uint32_t>(in, "metric epoch"));
    m.margin_loss = read_pod<double>(in, "metric margin");
    m.recon_loss = read_pod<double>(in, "metric recon");
    m.total_loss = read_pod<double>(in, "metric total");
    m.val_accuracy = read_pod<double>(in, "metric accuracy");
    snap.history.push_back(m);
  }
  snap.has_adam = read_pod<std::uint8_t>(in, "adam flag") != 0;
  snap.adam.step = read_pod<std::uint64_t>(in, "adam step");
  snap.adam.lr = read_pod<double>(in, "adam lr");

  // Build a reference model from the stored config so tensor names and shapes
  // can be verified against it.
  Model<float> reference = build_model<float>(snap.model.cfg);
  auto n_tensors = read_pod<std::uint32_t>(in, "tensor count");
  snap.model.param_names = reference.param_names;
  snap.model.param_tensors = reference.param_tensors;
  if (snap.has_adam) {
    const std::uint64_t step = snap.adam.step;  // init() zeroes the counter
    snap.adam.init(snap.model);
    snap.adam.step = step;
  }

  std::vector<bool> seen(reference.param_names.size(), false);
  auto find_param = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < reference.param_names.size(); ++i)
      if (reference.param_names[i] == name) return static_cast<int>(i);
    return -1;
  };
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    auto [name, t] = read_tensor(in);
    std::string base = name;
    int kind = 0;  // 0 param, 1 adam.m, 2 adam.v
    if (base.rfind("adam.m.", 0) == 0) {
      base = base.substr(7);
      kind = 1;
    } else if (base.rfind("adam.v.", 0) == 0) {
      base = base.substr(7);
      kind = 2;
    }
    const int pi = find_param(base);
    if (pi < 0) throw FormatError(path + ": unexpected tensor '" + name + "'");
    if (t.shape != reference.param_tensors[std::size_t(pi)].shape)
      throw FormatError(path + ": tensor '" + name + "' shape " + shape_str(t.shape) +
                        " does not match config shape " +
                        shape_str(reference.param_tensors[std::size_t(pi)].shape));
    if (kind == 0) {
      snap.model.param_tensors[std::size_t(pi)] = t;
      seen[std::size_t(pi)] = true;
    } else if (!snap.has_adam) {
      throw FormatError(path + ": optimizer tensor '" + name + "' but adam flag is unset");
    } else if (kind == 1) {
      snap.adam.m[std::size_t(pi)] = *t.data;
    } else {
      snap.adam.v[std::size_t(pi)] = *t.data;
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i])
      throw FormatError(path + ": missing parameter tensor '" + reference.param_names[i] + "'");
  return snap;
}

}  // namespace capsnet
