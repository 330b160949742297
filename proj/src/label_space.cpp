#include "logiccar/label_space.hpp"

#include <json.hpp>

#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace logiccar {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& text) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0' || errno == ERANGE)
    throw std::invalid_argument("not a number: '" + text + "'");
  return v;
}

std::string_view granularity_name(Granularity g) {
  switch (g) {
    case Granularity::kComposition: return "composition";
    case Granularity::kVerb: return "verb";
    case Granularity::kObject: return "object";
    case Granularity::kCoarseVerb: return "coarse_verb";
    case Granularity::kCoarseObject: return "coarse_object";
  }
  return "?";
}

std::optional<Granularity> parse_granularity(std::string_view name) {
  for (Granularity g : kAllGranularities)
    if (granularity_name(g) == name) return g;
  return std::nullopt;
}

std::string_view split_name(CompositionSplit s) {
  switch (s) {
    case CompositionSplit::kSeen: return "seen";
    case CompositionSplit::kUnseenVal: return "unseen_val";
    case CompositionSplit::kUnseenTest: return "unseen_test";
  }
  return "?";
}

CompositionSplit parse_split(std::string_view name) {
  if (name == "seen") return CompositionSplit::kSeen;
  if (name == "unseen_val") return CompositionSplit::kUnseenVal;
  if (name == "unseen_test") return CompositionSplit::kUnseenTest;
  throw LabelSpaceError("unknown composition split '" + std::string(name) + "'");
}

std::string LabelSpace::composition_name(Index c) const {
  const Composition& comp = compositions.at(static_cast<std::size_t>(c));
  return objects.at(static_cast<std::size_t>(comp.object)) + " " + verbs.at(static_cast<std::size_t>(comp.verb));
}

std::vector<Index> LabelSpace::compositions_in(CompositionSplit split) const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < compositions.size(); ++i)
    if (compositions[i].split == split) out.push_back(static_cast<Index>(i));
  return out;
}

std::optional<Index> LabelSpace::find(Index verb, Index object) const {
  for (std::size_t i = 0; i < compositions.size(); ++i)
    if (compositions[i].verb == verb && compositions[i].object == object) return static_cast<Index>(i);
  return std::nullopt;
}

void validate_label_space(const LabelSpace& ls) {
  if (ls.verbs.empty() || ls.objects.empty() || ls.compositions.empty())
    throw LabelSpaceError("label space has an empty vocabulary");
  const auto check_unique = [](const std::vector<std::string>& names, const char* what) {
    std::set<std::string> seen;
    for (const auto& n : names) {
      if (n.empty()) throw LabelSpaceError(std::string("empty ") + what + " name");
      if (!seen.insert(slugify(n)).second) throw LabelSpaceError(std::string("duplicate ") + what + " '" + n + "'");
    }
  };
  check_unique(ls.verbs, "verb");
  check_unique(ls.objects, "object");

  std::set<std::pair<Index, Index>> pairs;
  std::vector<bool> verb_seen(ls.verbs.size(), false);
  std::vector<bool> object_seen(ls.objects.size(), false);
  for (const Composition& c : ls.compositions) {
    if (c.verb < 0 || c.verb >= ls.num_verbs() || c.object < 0 || c.object >= ls.num_objects())
      throw LabelSpaceError("composition references an unknown primitive");
    if (!pairs.insert({c.verb, c.object}).second)
      throw LabelSpaceError("duplicate composition (" + ls.verbs[static_cast<std::size_t>(c.verb)] + ", " +
                            ls.objects[static_cast<std::size_t>(c.object)] + ")");
    if (c.split == CompositionSplit::kSeen) {
      verb_seen[static_cast<std::size_t>(c.verb)] = true;
      object_seen[static_cast<std::size_t>(c.object)] = true;
    }
  }
  if (static_cast<Index>(pairs.size()) >= ls.num_verbs() * ls.num_objects())
    throw LabelSpaceError("compositions must be a strict subset of V x O");
  for (std::size_t v = 0; v < verb_seen.size(); ++v)
    if (!verb_seen[v]) throw LabelSpaceError("verb '" + ls.verbs[v] + "' has no seen composition");
  for (std::size_t o = 0; o < object_seen.size(); ++o)
    if (!object_seen[o]) throw LabelSpaceError("object '" + ls.objects[o] + "' has no seen composition");
}

std::string slugify(std::string_view text) {
  std::string out;
  bool pending = false;
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      if (pending && !out.empty()) out.push_back('_');
      pending = false;
      out.push_back(static_cast<char>(std::tolower(ch)));
    } else {
      pending = true;
    }
  }
  return out;
}

std::string label_space_to_json(const LabelSpace& ls) {
  json comps = json::array();
  for (const Composition& c : ls.compositions)
    comps.push_back({{"verb", ls.verbs.at(static_cast<std::size_t>(c.verb))},
                     {"object", ls.objects.at(static_cast<std::size_t>(c.object))},
                     {"split", std::string(split_name(c.split))}});
  json doc = {{"verbs", ls.verbs}, {"objects", ls.objects}, {"compositions", comps}};
  return doc.dump(2) + "\n";
}

LabelSpace label_space_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw LabelSpaceError(std::string("labelspace: ") + e.what());
  }
  LabelSpace ls;
  try {
    ls.verbs = doc.at("verbs").get<std::vector<std::string>>();
    ls.objects = doc.at("objects").get<std::vector<std::string>>();
    std::map<std::string, Index> verb_ix;
    std::map<std::string, Index> object_ix;
    for (std::size_t i = 0; i < ls.verbs.size(); ++i) verb_ix[ls.verbs[i]] = static_cast<Index>(i);
    for (std::size_t i = 0; i < ls.objects.size(); ++i) object_ix[ls.objects[i]] = static_cast<Index>(i);
    for (const json& c : doc.at("compositions")) {
      const auto verb = c.at("verb").get<std::string>();
      const auto object = c.at("object").get<std::string>();
      auto v = verb_ix.find(verb);
      auto o = object_ix.find(object);
      if (v == verb_ix.end()) throw LabelSpaceError("labelspace: unknown verb '" + verb + "'");
      if (o == object_ix.end()) throw LabelSpaceError("labelspace: unknown object '" + object + "'");
      ls.compositions.push_back({v->second, o->second, parse_split(c.at("split").get<std::string>())});
    }
  } catch (const json::exception& e) {
    throw LabelSpaceError(std::string("labelspace: ") + e.what());
  }
  validate_label_space(ls);
  return ls;
}

void write_label_space(const std::filesystem::path& path, const LabelSpace& ls) {
  write_text_file(path, label_space_to_json(ls));
}

LabelSpace read_label_space(const std::filesystem::path& path) { return label_space_from_json(read_text_file(path)); }

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace logiccar
