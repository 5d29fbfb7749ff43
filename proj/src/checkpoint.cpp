// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/checkpoint.hpp"

#include "dynsplat/raw_io.hpp"

#include <json.hpp>

#include <cstring>
#include <functional>

namespace dynsplat {

using nlohmann::json;

namespace {

constexpr char kMagic[9] = "RIGS0001";

/// One named float32 array; `get`/`set` move values between the set and a flat buffer.
struct Field {
  std::string name;
  std::size_t count;
  std::function<void(std::vector<float> &)> get;
  std::function<void(const std::vector<float> &)> set;
};

template <typename G>
void add_core_fields(std::vector<Field> &fields, const std::string &prefix, std::vector<G> &pop) {
  const std::size_t n = pop.size();
  auto vec_field = [&](const char *name, int dim, auto member) {
    fields.push_back({prefix + "." + name, n * dim,
                      [&pop, dim, member](std::vector<float> &out) {
                        for (const auto &g : pop)
                          for (int d = 0; d < dim; ++d)
                            out.push_back(static_cast<float>(member(g)[d]));
                      },
                      [&pop, dim, member](const std::vector<float> &in) {
                        for (std::size_t i = 0; i < pop.size(); ++i)
                          for (int d = 0; d < dim; ++d)
                            member(pop[i])[d] = in[i * dim + d];
                      }});
  };
  vec_field("mean", 3, [](auto &g) -> auto & { return g.mean; });
  vec_field("log_scale", 3, [](auto &g) -> auto & { return g.log_scale; });
  vec_field("quat", 4, [](auto &g) -> auto & { return g.quat; });
  vec_field("opacity_logit", 1, [](auto &g) { return &g.opacity_logit; });
  vec_field("color", 3, [](auto &g) -> auto & { return g.color; });
}

template <typename G, typename Member>
Field scalar_field(const std::string &name, std::vector<G> &pop, Member member) {
  return {name, pop.size(),
          [&pop, member](std::vector<float> &out) {
            for (auto &g : pop)
              out.push_back(static_cast<float>(member(g)));
          },
          [&pop, member](const std::vector<float> &in) {
            for (std::size_t i = 0; i < pop.size(); ++i)
              member(pop[i]) = static_cast<std::remove_reference_t<decltype(member(pop[i]))>>(in[i]);
          }};
}

std::vector<Field> make_fields(GaussianSet &set) {
  std::vector<Field> fields;
  const int k = set.bases.num_bases();
  add_core_fields(fields, "static", set.statics);
  add_core_fields(fields, "rigid", set.rigids);
  fields.push_back({"rigid.weights", set.rigids.size() * k,
                    [&set, k](std::vector<float> &out) {
                      for (const auto &g : set.rigids)
                        for (int j = 0; j < k; ++j)
                          out.push_back(static_cast<float>(g.weights[j]));
                    },
                    [&set, k](const std::vector<float> &in) {
                      for (std::size_t i = 0; i < set.rigids.size(); ++i) {
                        set.rigids[i].weights.resize(k);
                        for (int j = 0; j < k; ++j)
                          set.rigids[i].weights[j] = in[i * k + j];
                      }
                    }});
  fields.push_back(scalar_field("rigid.beta", set.rigids, [](auto &g) -> double & { return g.beta; }));
  fields.push_back(scalar_field("rigid.gamma", set.rigids, [](auto &g) -> double & { return g.gamma; }));
  fields.push_back(scalar_field("rigid.origin", set.rigids, [](auto &g) -> std::int32_t & { return g.origin; }));

  add_core_fields(fields, "transient", set.transients);
  fields.push_back({"transient.velocity", set.transients.size() * 3,
                    [&set](std::vector<float> &out) {
                      for (const auto &g : set.transients)
                        for (int d = 0; d < 3; ++d)
                          out.push_back(static_cast<float>(g.velocity[d]));
                    },
                    [&set](const std::vector<float> &in) {
                      for (std::size_t i = 0; i < set.transients.size(); ++i)
                        for (int d = 0; d < 3; ++d)
                          set.transients[i].velocity[d] = in[i * 3 + d];
                    }});
  fields.push_back(scalar_field("transient.beta", set.transients, [](auto &g) -> double & { return g.beta; }));
  fields.push_back(scalar_field("transient.gamma", set.transients, [](auto &g) -> double & { return g.gamma; }));
  fields.push_back(
      scalar_field("transient.origin", set.transients, [](auto &g) -> std::int32_t & { return g.origin; }));
  fields.push_back(
      scalar_field("transient.from_rigid", set.transients, [](auto &g) -> bool & { return g.from_rigid; }));

  const std::size_t nb = set.bases.size();
  const int nf = set.bases.num_frames();
  fields.push_back({"bases.rotation", nb * 9,
                    [&set, k, nf](std::vector<float> &out) {
                      for (int j = 0; j < k; ++j)
                        for (int t = 0; t < nf; ++t)
                          for (int r = 0; r < 3; ++r)
                            for (int c = 0; c < 3; ++c)
                              out.push_back(static_cast<float>(set.bases.at(j, t).rotation(r, c)));
                    },
                    [&set, k, nf](const std::vector<float> &in) {
                      std::size_t i = 0;
                      for (int j = 0; j < k; ++j)
                        for (int t = 0; t < nf; ++t) {
                          Mat3 m;
                          for (int r = 0; r < 3; ++r)
                            for (int c = 0; c < 3; ++c)
                              m(r, c) = in[i++];
                          // float32 storage drifts off SO(3); re-orthonormalize.
                          set.bases.at(j, t).rotation = rot6d_to_matrix(Rotation6D::from_matrix(m));
                        }
                    }});
  fields.push_back({"bases.translation", nb * 3,
                    [&set, k, nf](std::vector<float> &out) {
                      for (int j = 0; j < k; ++j)
                        for (int t = 0; t < nf; ++t)
                          for (int d = 0; d < 3; ++d)
                            out.push_back(static_cast<float>(set.bases.at(j, t).translation[d]));
                    },
                    [&set, k, nf](const std::vector<float> &in) {
                      std::size_t i = 0;
                      for (int j = 0; j < k; ++j)
                        for (int t = 0; t < nf; ++t)
                          for (int d = 0; d < 3; ++d)
                            set.bases.at(j, t).translation[d] = in[i++];
                    }});
  return fields;
}

} // namespace

std::string serialize_checkpoint(const GaussianSet &set_in) {
  GaussianSet &set = const_cast<GaussianSet &>(set_in); // getters below only read
  std::vector<Field> fields = make_fields(set);
  json header;
  header["counts"] = {{"static", set.statics.size()}, {"rigid", set.rigids.size()}, {"transient", set.transients.size()}};
  header["K"] = set.bases.num_bases();
  header["T"] = set.bases.num_frames();
  header["alpha_gate"] = set.alpha_gate;
  header["fields"] = json::array();
  std::vector<float> payload;
  for (auto &f : fields) {
    const std::size_t offset = payload.size() * sizeof(float);
    f.get(payload);
    header["fields"].push_back({{"name", f.name}, {"offset", offset}, {"count", f.count}});
  }
  const std::string h = header.dump();
  const std::uint64_t hlen = h.size();
  std::string out(kMagic, 8);
  out.append(reinterpret_cast<const char *>(&hlen), sizeof(hlen));
  out += h;
  out.append(reinterpret_cast<const char *>(payload.data()), payload.size() * sizeof(float));
  return out;
}

GaussianSet deserialize_checkpoint(const std::string &bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 8, kMagic) != 0)
    throw BadMagic("checkpoint magic mismatch");
  std::uint64_t hlen = 0;
  std::memcpy(&hlen, bytes.data() + 8, sizeof(hlen));
  if (16 + hlen > bytes.size())
    throw ShapeMismatch("checkpoint header truncated");
  json header;
  try {
    header = json::parse(bytes.substr(16, hlen));
  } catch (const json::exception &e) {
    throw ShapeMismatch(std::string("checkpoint header: ") + e.what());
  }
  const std::size_t payload_at = 16 + hlen;

  GaussianSet set;
  set.statics.resize(header["counts"]["static"].get<std::size_t>());
  set.rigids.resize(header["counts"]["rigid"].get<std::size_t>());
  set.transients.resize(header["counts"]["transient"].get<std::size_t>());
  set.bases = MotionBases(header["K"].get<int>(), header["T"].get<int>());
  set.alpha_gate = header["alpha_gate"].get<double>();

  std::vector<Field> fields = make_fields(set);
  const auto &entries = header["fields"];
  if (entries.size() != fields.size())
    throw ShapeMismatch("checkpoint field list does not match this version");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto &e = entries[i];
    if (e["name"].get<std::string>() != fields[i].name || e["count"].get<std::size_t>() != fields[i].count)
      throw ShapeMismatch("checkpoint field mismatch at " + fields[i].name);
    const std::size_t off = payload_at + e["offset"].get<std::size_t>();
    if (off + fields[i].count * sizeof(float) > bytes.size())
      throw ShapeMismatch("checkpoint payload truncated at " + fields[i].name);
    std::vector<float> buf(fields[i].count);
    std::memcpy(buf.data(), bytes.data() + off, buf.size() * sizeof(float));
    fields[i].set(buf);
  }
  return set;
}

void save_checkpoint(const std::filesystem::path &path, const GaussianSet &set) {
  io::atomic_write(path, serialize_checkpoint(set));
}

GaussianSet load_checkpoint(const std::filesystem::path &path) {
  if (!std::filesystem::exists(path))
    throw MissingChannel(path.string());
  return deserialize_checkpoint(io::read_file(path));
}

} // namespace dynsplat
