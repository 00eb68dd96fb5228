#include "kdseq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace kdseq {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void put_double(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

double get_double(const char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Seq2SeqModel& model, const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  for (const auto& [name, t] : model.params) {
    out << name << ' ' << t.rank();
    for (auto d : t.shape()) out << ' ' << d;
    out << '\n';
    for (double v : t.values()) put_double(out, v);
  }
  const auto& c = model.config;
  out << "meta layers=" << c.layers << " hidden=" << c.hidden << " embed_dim=" << c.embed_dim
      << " src_vocab_size=" << c.src_vocab_size << " tgt_vocab_size=" << c.tgt_vocab_size
      << " dropout_rate=" << format_double(c.dropout_rate) << " src_vocab_checksum=" << hex64(meta.src_vocab_checksum)
      << " tgt_vocab_checksum=" << hex64(meta.tgt_vocab_checksum) << '\n';
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::string> meta;
  std::string line;
  bool have_meta = false;
  while (std::getline(in, line)) {
    std::istringstream is(line);
    std::string name;
    is >> name;
    if (name == "meta") {
      std::string kv;
      while (is >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw CheckpointError(path.string() + ": malformed metadata field " + kv);
        meta[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      have_meta = true;
      break;
    }
    std::size_t ndim = 0;
    if (!(is >> ndim) || ndim == 0) throw CheckpointError(path.string() + ": malformed header for " + name);
    Shape shape(ndim);
    for (auto& d : shape)
      if (!(is >> d) || d == 0) throw CheckpointError(path.string() + ": malformed shape for " + name);
    const std::size_t n = shape_size(shape);
    std::string raw(n * 8, '\0');
    if (!in.read(raw.data(), static_cast<std::streamsize>(raw.size())))
      throw CheckpointError(path.string() + ": truncated data for " + name);
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = get_double(raw.data() + 8 * i);
    if (!tensors.emplace(name, Tensor::from(std::move(shape), std::move(values), true)).second)
      throw CheckpointError(path.string() + ": duplicate tensor " + name);
  }
  if (!have_meta) throw CheckpointError(path.string() + ": missing metadata record");

  auto field = [&](const char* key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw CheckpointError(path.string() + ": metadata lacks " + key);
    return it->second;
  };
  Checkpoint ck;
  try {
    auto& c = ck.model.config;
    c.layers = std::stoul(field("layers"));
    c.hidden = std::stoul(field("hidden"));
    c.embed_dim = std::stoul(field("embed_dim"));
    c.src_vocab_size = std::stoul(field("src_vocab_size"));
    c.tgt_vocab_size = std::stoul(field("tgt_vocab_size"));
    c.dropout_rate = std::stod(field("dropout_rate"));
    ck.meta.src_vocab_checksum = std::stoull(field("src_vocab_checksum"), nullptr, 16);
    ck.meta.tgt_vocab_checksum = std::stoull(field("tgt_vocab_checksum"), nullptr, 16);
    c.validate();
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(path.string() + ": invalid metadata: " + e.what());
  }

  const auto layout = parameter_layout(ck.model.config);
  if (layout.size() != tensors.size())
    throw CheckpointError(path.string() + ": expected " + std::to_string(layout.size()) + " tensors, found " +
                          std::to_string(tensors.size()));
  for (const auto& [name, shape] : layout) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw CheckpointError(path.string() + ": missing tensor " + name);
    if (it->second.shape() != shape)
      throw CheckpointError(path.string() + ": tensor " + name + " has shape " + to_string(it->second.shape()) +
                            ", config implies " + to_string(shape));
    ck.model.params.insert(name, it->second);
  }
  return ck;
}

}  // namespace kdseq
