#include "logiccar/hierarchy.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <set>
#include <thread>

namespace logiccar {

using nlohmann::json;

std::vector<std::string> validate_hierarchy(const LabelSpace& ls, const Hierarchy& h) {
  std::vector<std::string> errors;
  if (h.coarse_verb_names.empty()) errors.push_back("no coarse verb categories");
  if (h.coarse_object_names.empty()) errors.push_back("no coarse object categories");

  const auto check_level = [&](const std::vector<Index>& parent, const std::vector<std::string>& fine,
                               const std::vector<std::string>& coarse, const char* fine_kind,
                               const char* coarse_kind) {
    const auto n_coarse = static_cast<Index>(coarse.size());
    for (std::size_t i = parent.size(); i < fine.size(); ++i)
      errors.push_back(std::string(fine_kind) + " '" + fine[i] + "' has no parent");
    if (parent.size() > fine.size())
      errors.push_back(std::string(fine_kind) + " parent table has " + std::to_string(parent.size()) +
                       " entries for " + std::to_string(fine.size()) + " categories");
    std::vector<int> members(coarse.size(), 0);
    for (std::size_t i = 0; i < std::min(parent.size(), fine.size()); ++i) {
      if (parent[i] < 0 || parent[i] >= n_coarse) {
        errors.push_back(std::string(fine_kind) + " '" + fine[i] + "' has out-of-bounds parent " +
                         std::to_string(parent[i]) + " (" + coarse_kind + " count " + std::to_string(n_coarse) + ")");
      } else {
        ++members[static_cast<std::size_t>(parent[i])];
      }
    }
    std::set<std::string> names;
    for (std::size_t c = 0; c < coarse.size(); ++c) {
      if (members[c] == 0) errors.push_back(std::string(coarse_kind) + " '" + coarse[c] + "' has no members");
      if (!names.insert(slugify(coarse[c])).second)
        errors.push_back(std::string("duplicate ") + coarse_kind + " '" + coarse[c] + "'");
    }
  };
  check_level(h.verb_parent, ls.verbs, h.coarse_verb_names, "verb", "coarse verb");
  check_level(h.object_parent, ls.objects, h.coarse_object_names, "object", "coarse object");
  return errors;
}

namespace {

Partition partition_by_key(const std::vector<std::string>& keys) {
  Partition p;
  std::map<std::string, Index> index;
  for (const auto& key : keys) {
    auto [it, inserted] = index.try_emplace(key, static_cast<Index>(p.names.size()));
    if (inserted) p.names.push_back(key);
    p.parent.push_back(it->second);
  }
  return p;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Partition cluster_verbs(const std::vector<std::string>& verb_names) {
  if (verb_names.empty()) throw HierarchyError("no verbs to cluster");
  std::vector<std::string> keys;
  for (const auto& name : verb_names) {
    const std::string t = trim(name);
    if (t.empty()) throw HierarchyError("empty verb name");
    keys.push_back(to_lower(t.substr(0, t.find_first_of(" \t"))));
  }
  return partition_by_key(keys);
}

std::string normalize_coarse_name(std::string_view raw) {
  std::string s = to_lower(trim(raw));
  while (!s.empty() && (std::ispunct(static_cast<unsigned char>(s.back())) ||
                        std::isspace(static_cast<unsigned char>(s.back()))))
    s.pop_back();
  return trim(s);
}

VoteResult aggregate_votes(const std::vector<std::string>& objects, const std::vector<TrialMapping>& trials) {
  if (trials.empty()) throw HierarchyError("no taxonomy trials to aggregate");
  VoteResult result;
  std::vector<std::string> chosen;
  for (const auto& object : objects) {
    TaxonomyVote vote;
    vote.object = object;
    std::map<std::string, int> counts;
    for (std::size_t t = 0; t < trials.size(); ++t) {
      auto it = trials[t].find(object);
      if (it == trials[t].end())
        throw HierarchyError("trial " + std::to_string(t) + " has no answer for object '" + object + "'");
      vote.proposals.push_back(normalize_coarse_name(it->second));
      ++counts[vote.proposals.back()];
    }
    int best = 0;
    int holders = 0;
    // std::map iterates names in lexicographic order, so the first maximal
    // name is the smallest one.
    for (const auto& [name, n] : counts) {
      if (n > best) {
        best = n;
        holders = 1;
        vote.chosen = name;
      } else if (n == best) {
        ++holders;
      }
    }
    vote.tie = holders > 1;
    chosen.push_back(vote.chosen);
    result.votes.push_back(std::move(vote));
  }
  result.partition = partition_by_key(chosen);
  return result;
}

std::vector<TrialMapping> read_vote_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw HierarchyError("vote directory '" + dir.string() + "' does not exist");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw HierarchyError("no *.json trial files in '" + dir.string() + "'");
  std::vector<TrialMapping> trials;
  for (const auto& f : files) {
    try {
      trials.push_back(nlohmann::json::parse(read_text_file(f)).get<TrialMapping>());
    } catch (const nlohmann::json::exception& e) {
      throw HierarchyError(f.string() + ": " + e.what());
    }
  }
  return trials;
}

Partition heuristic_object_partition(const std::vector<std::string>& objects) {
  std::vector<std::string> keys;
  for (const auto& name : objects) {
    const auto pos = name.find('_');
    keys.push_back(pos == std::string::npos || pos + 1 == name.size() ? name : name.substr(pos + 1));
  }
  return partition_by_key(keys);
}

Hierarchy make_hierarchy(const Partition& verbs, const Partition& objects) {
  return Hierarchy{verbs.parent, objects.parent, verbs.names, objects.names};
}

std::string hierarchy_to_json(const LabelSpace& ls, const Hierarchy& h) {
  const auto level = [](const std::vector<Index>& parent, const std::vector<std::string>& fine,
                        const std::vector<std::string>& coarse, const char* member_key) {
    json arr = json::array();
    for (std::size_t c = 0; c < coarse.size(); ++c) {
      std::vector<std::string> members;
      for (std::size_t i = 0; i < parent.size(); ++i)
        if (parent[i] == static_cast<Index>(c)) members.push_back(fine.at(i));
      arr.push_back({{"name", coarse[c]}, {member_key, members}});
    }
    return arr;
  };
  json doc = {{"coarse_verbs", level(h.verb_parent, ls.verbs, h.coarse_verb_names, "verbs")},
              {"coarse_objects", level(h.object_parent, ls.objects, h.coarse_object_names, "objects")}};
  return doc.dump(2) + "\n";
}

Hierarchy hierarchy_from_json(std::string_view text, const LabelSpace& ls) {
  Hierarchy h;
  try {
    const json doc = json::parse(text);
    const auto level = [](const json& arr, const std::vector<std::string>& fine, const char* member_key,
                          std::vector<Index>& parent, std::vector<std::string>& names) {
      std::map<std::string, Index> fine_ix;
      for (std::size_t i = 0; i < fine.size(); ++i) fine_ix[fine[i]] = static_cast<Index>(i);
      parent.assign(fine.size(), -1);
      for (const json& entry : arr) {
        names.push_back(entry.at("name").get<std::string>());
        for (const auto& m : entry.at(member_key).get<std::vector<std::string>>()) {
          auto it = fine_ix.find(m);
          if (it == fine_ix.end()) throw HierarchyError("hierarchy: unknown member '" + m + "'");
          if (parent[static_cast<std::size_t>(it->second)] != -1)
            throw HierarchyError("hierarchy: '" + m + "' listed under two parents");
          parent[static_cast<std::size_t>(it->second)] = static_cast<Index>(names.size() - 1);
        }
      }
      // Unassigned members stay -1 and surface through validate_hierarchy.
    };
    level(doc.at("coarse_verbs"), ls.verbs, "verbs", h.verb_parent, h.coarse_verb_names);
    level(doc.at("coarse_objects"), ls.objects, "objects", h.object_parent, h.coarse_object_names);
  } catch (const json::exception& e) {
    throw HierarchyError(std::string("hierarchy: ") + e.what());
  }
  return h;
}

void write_hierarchy(const std::filesystem::path& path, const LabelSpace& ls, const Hierarchy& h) {
  write_text_file(path, hierarchy_to_json(ls, h));
}

Hierarchy read_hierarchy(const std::filesystem::path& path, const LabelSpace& ls) {
  return hierarchy_from_json(read_text_file(path), ls);
}

// ---------------------------------------------------------------------------

const char* const kDefaultTaxonomyPrompt =
    "Q: Categorize the following object into a broad category: chair.\n"
    "A: chair belongs to furniture.\n"
    "Complete the following dialog with the format of the example. Do not print any extra words!\n"
    "Q: Categorize the following object into a broad category: [OBJECT CATEGORY].\n"
    "A: [OBJECT CATEGORY] belongs to ";

std::string render_prompt(std::string_view prompt_template, std::string_view object) {
  static constexpr std::string_view kSlot = "[OBJECT CATEGORY]";
  std::string out(prompt_template);
  for (auto pos = out.find(kSlot); pos != std::string::npos; pos = out.find(kSlot, pos + object.size()))
    out.replace(pos, kSlot.size(), object);
  return out;
}

std::optional<std::string> parse_completion(std::string_view completion) {
  static constexpr std::string_view kMarker = "belongs to";
  std::size_t start = 0;
  while (start <= completion.size()) {
    auto end = completion.find('\n', start);
    if (end == std::string_view::npos) end = completion.size();
    std::string_view line = completion.substr(start, end - start);
    const auto pos = line.find(kMarker);
    if (pos != std::string_view::npos) {
      std::string name = normalize_coarse_name(line.substr(pos + kMarker.size()));
      if (!name.empty()) return name;
    }
    start = end + 1;
  }
  return std::nullopt;
}

std::optional<LlmEndpoint> LlmEndpoint::from_env() {
  const char* url = std::getenv("LOGICCAR_LLM_ENDPOINT");
  if (url == nullptr || *url == '\0') return std::nullopt;
  LlmEndpoint ep;
  ep.url = url;
  if (const char* key = std::getenv("LOGICCAR_LLM_KEY")) ep.key = key;
  return ep;
}

LlmTransport http_transport(const LlmEndpoint& endpoint) {
  return [endpoint](const std::string& prompt) -> std::string {
    const auto scheme_end = endpoint.url.find("://");
    const auto path_start = endpoint.url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    const std::string base = endpoint.url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : endpoint.url.substr(path_start);

    httplib::Client client(base);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    httplib::Headers headers;
    if (!endpoint.key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.key);
    const json body = {{"model", endpoint.model}, {"prompt", prompt}};
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw LlmError("request to " + endpoint.url + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw LlmError("request to " + endpoint.url + " returned HTTP " + std::to_string(res->status));
    try {
      return json::parse(res->body).at("text").get<std::string>();
    } catch (const json::exception& e) {
      throw LlmError(std::string("malformed LLM response body: ") + e.what());
    }
  };
}

std::filesystem::path cache_file(const std::filesystem::path& cache_dir, std::string_view object, int trial) {
  return cache_dir / slugify(object) / ("trial_" + std::to_string(trial) + ".txt");
}

LlmTaxonomy query_llm_taxonomy(const std::vector<std::string>& objects, const LlmQueryOptions& options) {
  if (options.trials < 1) throw LlmError("at least one trial is required");
  LlmTaxonomy out;
  out.trials.resize(static_cast<std::size_t>(options.trials));
  for (const auto& object : objects) {
    const std::string prompt = render_prompt(options.prompt_template, object);
    for (int t = 0; t < options.trials; ++t) {
      const auto path = cache_file(options.cache_dir, object, t);
      std::string response;
      if (std::filesystem::exists(path)) {
        response = read_text_file(path);
      } else {
        if (!options.transport)
          throw LlmError("no cached response at " + path.string() + " and no LLM endpoint configured");
        auto backoff = options.initial_backoff;
        for (int attempt = 0;; ++attempt) {
          try {
            response = (*options.transport)(prompt);
            break;
          } catch (const std::exception& e) {
            if (attempt + 1 >= options.max_retries)
              throw LlmError("trial " + std::to_string(t) + " for '" + object + "' failed after " +
                             std::to_string(options.max_retries) + " attempts: " + e.what());
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
          }
        }
        write_text_file(path, response);
      }
      auto name = parse_completion(response);
      if (!name) {
        out.parse_errors.push_back({object, t, response});
        name = "unknown";
      }
      out.trials[static_cast<std::size_t>(t)][object] = *name;
    }
  }
  return out;
}

}  // namespace logiccar
