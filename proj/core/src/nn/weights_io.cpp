#include "thermocad/nn/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "../json_convert.hpp"

namespace thermocad::nn {

namespace {

constexpr std::string_view kMagic = "TCADW1\n";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

std::vector<Tensor<float>*> tensors_of(Model<float>& model, nlohmann::json* names) {
  std::vector<Tensor<float>*> out;
  std::size_t b = 0;
  for (Param<float>* p : model.params()) {
    out.push_back(&p->value);
    if (names) names->push_back({{"name", p->name}, {"shape", p->value.shape()}});
  }
  for (Tensor<float>* t : model.buffers()) {
    out.push_back(t);
    if (names) names->push_back({{"name", "buffer" + std::to_string(b++)}, {"shape", t->shape()}});
  }
  return out;
}

struct Parsed {
  HyperParams hp;
  InputShape input;
  nlohmann::json tensors;
  std::size_t payload = 0;
};

Parsed parse_header(const std::string& bytes) {
  if (bytes.size() < kMagic.size() + 4 || bytes.compare(0, kMagic.size(), kMagic) != 0) {
    raise(Errc::FormatError, "missing TCADW1 magic");
  }
  const std::uint32_t len = get_u32(bytes, kMagic.size());
  const std::size_t start = kMagic.size() + 4;
  if (bytes.size() < start + len) raise(Errc::FormatError, "truncated header");
  Parsed out;
  try {
    const auto header = nlohmann::json::parse(bytes.begin() + start, bytes.begin() + start + len);
    if (header.at("byte_order") != "little" || header.at("dtype") != "float32") {
      raise(Errc::FormatError, "unsupported byte order or dtype");
    }
    out.hp = header.at("hyperparams").get<HyperParams>();
    out.input = header.at("input_shape").get<InputShape>();
    out.tensors = header.at("tensors");
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::FormatError, std::string("bad header: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::FormatError) throw;
    raise(Errc::FormatError, std::string("bad header: ") + e.what());
  }
  out.payload = start + len;
  return out;
}

void fill_tensors(Model<float>& model, const Parsed& parsed, const std::string& bytes) {
  const auto tensors = tensors_of(model, nullptr);
  if (parsed.tensors.size() != tensors.size()) raise(Errc::ArchitectureMismatch, "tensor count differs");
  std::size_t total = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (parsed.tensors[i].at("shape").get<Shape>() != tensors[i]->shape()) {
      raise(Errc::ArchitectureMismatch, "tensor " + std::to_string(i) + " shape differs");
    }
    total += tensors[i]->size();
  }
  if (bytes.size() != parsed.payload + total * 4) {
    raise(Errc::FormatError, "payload holds " + std::to_string(bytes.size() - parsed.payload) + " bytes, expected " +
                                 std::to_string(total * 4));
  }
  std::size_t at = parsed.payload;
  for (Tensor<float>* t : tensors) {
    for (std::size_t i = 0; i < t->size(); ++i, at += 4) (*t)[i] = std::bit_cast<float>(get_u32(bytes, at));
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::IoError, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

std::string serialize_weights(Model<float>& model) {
  nlohmann::json names = nlohmann::json::array();
  const auto tensors = tensors_of(model, &names);
  const nlohmann::json header{{"hyperparams", model.hyperparams()},
                              {"input_shape", model.input_shape()},
                              {"tensors", names},
                              {"byte_order", "little"},
                              {"dtype", "float32"}};
  const std::string text = header.dump();
  std::string out(kMagic);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const Tensor<float>* t : tensors) {
    for (std::size_t i = 0; i < t->size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>((*t)[i]));
  }
  return out;
}

void save_weights(Model<float>& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_weights(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(Errc::IoError, "write failed for " + path.string());
}

Model<float> deserialize_weights(const std::string& bytes) {
  const Parsed parsed = parse_header(bytes);
  Model<float> model(parsed.hp, parsed.input, 0);
  fill_tensors(model, parsed, bytes);
  return model;
}

Model<float> load_weights(const std::filesystem::path& path) { return deserialize_weights(read_file(path)); }

void load_weights_into(Model<float>& model, const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const Parsed parsed = parse_header(bytes);
  if (!(parsed.hp == model.hyperparams()) || !(parsed.input == model.input_shape())) {
    raise(Errc::ArchitectureMismatch, "file holds " + parsed.hp.describe() + ", model is " +
                                          model.hyperparams().describe());
  }
  fill_tensors(model, parsed, bytes);
}

}  // namespace thermocad::nn
