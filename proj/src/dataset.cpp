#include "atomcal/dataset.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "atomcal/error.hpp"
#include "atomcal/gateway.hpp"
#include "atomcal/hashing.hpp"
#include "atomcal/text.hpp"

namespace atomcal {

using nlohmann::json;

std::string_view to_string(DatasetFormat f) noexcept {
  switch (f) {
    case DatasetFormat::Auto: return "auto";
    case DatasetFormat::Unified: return "unified";
    case DatasetFormat::Pope: return "pope";
    case DatasetFormat::Mme: return "mme";
    case DatasetFormat::Hallusion: return "hallusion";
    case DatasetFormat::Amber: return "amber";
  }
  return "auto";
}

std::optional<DatasetFormat> dataset_format_from_string(std::string_view s) {
  for (auto f : {DatasetFormat::Auto, DatasetFormat::Unified, DatasetFormat::Pope, DatasetFormat::Mme,
                 DatasetFormat::Hallusion, DatasetFormat::Amber}) {
    if (text::to_lower(s) == to_string(f)) return f;
  }
  return std::nullopt;
}

std::string name_digest(std::string_view image_name) { return sha256_hex("image-name:" + std::string(image_name)); }

namespace {

struct RawRecord {
  json value;
  int line = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int line_of_offset(const std::string& content, std::size_t offset) {
  offset = std::min(offset, content.size());
  return 1 + static_cast<int>(std::count(content.begin(), content.begin() + static_cast<long>(offset), '\n'));
}

// A JSON array file, or one JSON value per line.
std::vector<RawRecord> read_records(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  std::vector<RawRecord> out;
  const auto first = content.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return out;
  if (content[first] == '[') {
    json arr;
    try {
      arr = json::parse(content);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ParseError,
                  path.string() + ": line " + std::to_string(line_of_offset(content, e.byte)) + ": " + e.what());
    }
    // Element line numbers are not tracked for arrays; report the index.
    int idx = 0;
    for (auto& v : arr) out.push_back({std::move(v), ++idx});
    return out;
  }
  const auto lines = text::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    try {
      out.push_back({json::parse(lines[i]), static_cast<int>(i) + 1});
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ParseError, path.string() + ": line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

[[noreturn]] void missing(const std::filesystem::path& path, int line, std::string_view field) {
  throw Error(ErrorCode::SchemaError,
              path.string() + ": record " + std::to_string(line) + ": missing field '" + std::string(field) + "'");
}

std::string scalar_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return v.dump();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return {};
}

// First present, non-null field among `names`.
const json* field(const json& obj, std::initializer_list<std::string_view> names) {
  if (!obj.is_object()) return nullptr;
  for (auto n : names) {
    auto it = obj.find(std::string(n));
    if (it != obj.end() && !it->is_null()) return &*it;
  }
  return nullptr;
}

std::string require_string(const json& obj, std::initializer_list<std::string_view> names,
                           const std::filesystem::path& path, int line) {
  const json* v = field(obj, names);
  if (!v) missing(path, line, *names.begin());
  std::string s = scalar_string(*v);
  if (s.empty() && !v->is_string()) missing(path, line, *names.begin());
  return s;
}

Answer require_gold(const json& v, const std::filesystem::path& path, int line, std::string_view name) {
  auto a = answer_from_string(text::trim(scalar_string(v)));
  if (!a || *a == Answer::Unparseable) {
    throw Error(ErrorCode::SchemaError, path.string() + ": record " + std::to_string(line) + ": field '" +
                                            std::string(name) + "' is not a yes/no label: " + v.dump());
  }
  return *a;
}

class ImageResolver {
public:
  explicit ImageResolver(const LoadOptions& options) : root_(options.image_root) {}

  std::string ref(const std::string& name) {
    if (name.empty()) return name_digest(name);
    auto it = memo_.find(name);
    if (it != memo_.end()) return it->second;
    std::string digest;
    if (root_) {
      std::error_code ec;
      const auto p = *root_ / name;
      if (std::filesystem::is_regular_file(p, ec)) digest = ImageStore::digest_file(p);
    }
    if (digest.empty()) digest = name_digest(name);
    memo_.emplace(name, digest);
    return digest;
  }

private:
  std::optional<std::filesystem::path> root_;
  std::map<std::string, std::string> memo_;
};

std::string pope_split(const json& rec, const std::filesystem::path& path) {
  if (const json* s = field(rec, {"split", "category"})) return scalar_string(*s);
  const std::string stem = text::to_lower(path.stem().string());
  for (std::string_view split : {"adversarial", "popular", "random"}) {
    if (stem.find(split) != std::string::npos) return std::string(split);
  }
  return {};
}

std::vector<DatasetExample> load_pope(const std::filesystem::path& path, ImageResolver& images) {
  std::vector<DatasetExample> out;
  for (const auto& [rec, line] : read_records(path)) {
    DatasetExample ex;
    ex.question = require_string(rec, {"text", "question"}, path, line);
    ex.image = require_string(rec, {"image"}, path, line);
    const json* label = field(rec, {"label", "answer"});
    if (!label) missing(path, line, "label");
    ex.gold = require_gold(*label, path, line, "label");
    const std::string qid = field(rec, {"question_id", "id"}) ? require_string(rec, {"question_id", "id"}, path, line)
                                                                : std::to_string(line);
    const std::string split = pope_split(rec, path);
    ex.example_id = split.empty() ? qid : split + "-" + qid;
    if (!split.empty()) ex.group_keys.emplace(keys::kSplit, split);
    ex.image_ref = images.ref(ex.image);
    out.push_back(std::move(ex));
  }
  return out;
}

DatasetExample mme_example(std::string category, std::string image, std::string question, Answer gold,
                           std::string id, ImageResolver& images) {
  DatasetExample ex;
  ex.example_id = std::move(id);
  ex.image = std::move(image);
  ex.question = std::move(question);
  ex.gold = gold;
  ex.group_keys.emplace(keys::kSubtask, category);
  ex.group_keys.emplace(keys::kImageId, category + "/" + ex.image);
  ex.image_ref = images.ref(ex.image);
  return ex;
}

std::vector<DatasetExample> load_mme(const std::filesystem::path& path, ImageResolver& images) {
  std::vector<DatasetExample> out;
  if (path.extension() == ".txt" || path.extension() == ".tsv") {
    const std::string category = path.stem().string();
    const auto lines = text::split_lines(read_file(path));
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (text::trim(lines[i]).empty()) continue;
      const int line = static_cast<int>(i) + 1;
      std::vector<std::string> cols;
      std::stringstream ss(lines[i]);
      std::string col;
      while (std::getline(ss, col, '\t')) cols.push_back(col);
      if (cols.size() < 3) {
        throw Error(ErrorCode::ParseError, path.string() + ": line " + std::to_string(line) +
                                               ": expected image<TAB>question<TAB>answer");
      }
      const Answer gold = require_gold(json(text::trim(cols[2])), path, line, "answer");
      out.push_back(mme_example(category, cols[0], cols[1], gold, category + "-" + std::to_string(line), images));
    }
    return out;
  }
  for (const auto& [rec, line] : read_records(path)) {
    const std::string category = require_string(rec, {"category", "subtask"}, path, line);
    const std::string image = require_string(rec, {"image", "image_id"}, path, line);
    const std::string question = require_string(rec, {"question", "text"}, path, line);
    const json* label = field(rec, {"answer", "label", "gt_answer"});
    if (!label) missing(path, line, "answer");
    const Answer gold = require_gold(*label, path, line, "answer");
    const std::string id = field(rec, {"question_id", "id"}) ? require_string(rec, {"question_id", "id"}, path, line)
                                                               : category + "-" + std::to_string(line);
    out.push_back(mme_example(category, image, question, gold, id, images));
  }
  return out;
}

std::vector<DatasetExample> load_hallusion(const std::filesystem::path& path, ImageResolver& images) {
  std::vector<DatasetExample> out;
  for (const auto& [rec, line] : read_records(path)) {
    const std::string category = require_string(rec, {"category"}, path, line);
    const std::string sub = require_string(rec, {"subcategory"}, path, line);
    const std::string set_id = require_string(rec, {"set_id"}, path, line);
    const std::string figure_id = require_string(rec, {"figure_id"}, path, line);
    const std::string question_id = require_string(rec, {"question_id"}, path, line);
    const std::string visual = require_string(rec, {"visual_input"}, path, line);
    DatasetExample ex;
    ex.question = require_string(rec, {"question"}, path, line);
    const json* gt = field(rec, {"gt_answer"});
    if (!gt) missing(path, line, "gt_answer");
    ex.gold = require_gold(*gt, path, line, "gt_answer");
    const std::string prefix = category + "/" + sub + "/" + set_id;
    ex.example_id = prefix + "/" + figure_id + "/" + question_id;
    ex.group_keys.emplace(keys::kPairId, prefix + "/" + question_id);
    ex.group_keys.emplace(keys::kFigureId, prefix + "/" + figure_id);
    ex.group_keys.emplace(keys::kDifficulty, visual == "1" ? "easy" : visual == "2" ? "hard" : "no_image");
    ex.group_keys.emplace(keys::kSubtask, category);
    if (const json* f = field(rec, {"filename"})) ex.image = scalar_string(*f);
    ex.image_ref = images.ref(ex.image);
    out.push_back(std::move(ex));
  }
  return out;
}

std::set<std::string> string_set(const json& v, const std::filesystem::path& path, int line, std::string_view name) {
  if (!v.is_array()) {
    throw Error(ErrorCode::SchemaError,
                path.string() + ": record " + std::to_string(line) + ": field '" + std::string(name) + "' must be a list");
  }
  std::set<std::string> out;
  for (const auto& s : v) out.insert(text::to_lower(text::trim(scalar_string(s))));
  out.erase("");
  return out;
}

std::vector<DatasetExample> load_amber(const std::filesystem::path& path, ImageResolver& images) {
  std::vector<DatasetExample> out;
  for (const auto& [rec, line] : read_records(path)) {
    DatasetExample ex;
    ex.example_id = require_string(rec, {"id", "example_id"}, path, line);
    ex.image = require_string(rec, {"image"}, path, line);
    ex.question = require_string(rec, {"query", "question"}, path, line);
    if (const json* truth = field(rec, {"truth"})) {
      if (truth->is_array()) {
        ex.gold_objects = string_set(*truth, path, line, "truth");
      } else {
        ex.gold = require_gold(*truth, path, line, "truth");
      }
    }
    if (const json* hallu = field(rec, {"hallu"})) ex.hallucination_targets = string_set(*hallu, path, line, "hallu");
    if (const json* t = field(rec, {"type"})) ex.group_keys.emplace(keys::kSubtask, scalar_string(*t));
    ex.image_ref = images.ref(ex.image);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<DatasetExample> load_unified(const std::filesystem::path& path, ImageResolver& images) {
  std::vector<DatasetExample> out;
  for (const auto& [rec, line] : read_records(path)) {
    try {
      DatasetExample ex = example_from_json(rec);
      if (ex.image_ref.empty()) ex.image_ref = images.ref(ex.image);
      out.push_back(std::move(ex));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ": record " + std::to_string(line) + ": " + e.detail());
    }
  }
  return out;
}

}  // namespace

DatasetFormat detect_format(const std::filesystem::path& path) {
  if (path.extension() == ".txt" || path.extension() == ".tsv") return DatasetFormat::Mme;
  const auto records = read_records(path);
  if (records.empty()) return DatasetFormat::Unified;
  const json& r = records.front().value;
  if (!r.is_object()) throw Error(ErrorCode::SchemaError, path.string() + ": records must be JSON objects");
  if (r.contains("example_id")) return DatasetFormat::Unified;
  if (r.contains("gt_answer") && r.contains("figure_id")) return DatasetFormat::Hallusion;
  if (r.contains("query")) return DatasetFormat::Amber;
  if (r.contains("category") && (r.contains("answer") || r.contains("label")) && !r.contains("text"))
    return DatasetFormat::Mme;
  if (r.contains("label")) return DatasetFormat::Pope;
  throw Error(ErrorCode::SchemaError, path.string() + ": cannot detect dataset format; pass it explicitly");
}

std::vector<DatasetExample> load_dataset(const std::filesystem::path& path, DatasetFormat format,
                                         const LoadOptions& options) {
  if (format == DatasetFormat::Auto) format = detect_format(path);
  ImageResolver images(options);
  std::vector<DatasetExample> out;
  switch (format) {
    case DatasetFormat::Unified: out = load_unified(path, images); break;
    case DatasetFormat::Pope: out = load_pope(path, images); break;
    case DatasetFormat::Mme: out = load_mme(path, images); break;
    case DatasetFormat::Hallusion: out = load_hallusion(path, images); break;
    case DatasetFormat::Amber: out = load_amber(path, images); break;
    case DatasetFormat::Auto: break;
  }
  std::unordered_set<std::string> seen;
  for (const auto& ex : out) {
    if (!seen.insert(ex.example_id).second) {
      throw Error(ErrorCode::SchemaError, path.string() + ": duplicate example_id '" + ex.example_id + "'");
    }
  }
  return out;
}

json to_json(const DatasetExample& ex) {
  json j;
  j["example_id"] = ex.example_id;
  j["image"] = ex.image;
  j["image_ref"] = ex.image_ref;
  j["question"] = ex.question;
  j["gold"] = ex.gold ? json(std::string(to_string(*ex.gold))) : json(nullptr);
  j["gold_objects"] = ex.gold_objects ? json(*ex.gold_objects) : json(nullptr);
  j["hallucination_targets"] = ex.hallucination_targets;
  j["group_keys"] = json::object();
  for (const auto& [k, v] : ex.group_keys) j["group_keys"][k] = v;
  j["initial_answer"] = ex.initial_answer ? json(*ex.initial_answer) : json(nullptr);
  return j;
}

DatasetExample example_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, "example must be a JSON object");
  auto str = [&](const char* name, bool required) -> std::string {
    auto it = j.find(name);
    if (it == j.end() || it->is_null()) {
      if (required) throw Error(ErrorCode::SchemaError, std::string("missing field '") + name + "'");
      return {};
    }
    if (!it->is_string()) throw Error(ErrorCode::SchemaError, std::string("field '") + name + "' must be a string");
    return it->get<std::string>();
  };
  DatasetExample ex;
  ex.example_id = str("example_id", true);
  ex.question = str("question", true);
  ex.image = str("image", false);
  ex.image_ref = str("image_ref", false);
  if (!ex.image_ref.empty() && !is_hex_digest(ex.image_ref)) {
    throw Error(ErrorCode::SchemaError, "image_ref must be a 64-character lowercase hex digest");
  }
  if (auto it = j.find("gold"); it != j.end() && !it->is_null()) {
    auto a = answer_from_string(scalar_string(*it));
    if (!a || *a == Answer::Unparseable) throw Error(ErrorCode::SchemaError, "gold must be Yes or No");
    ex.gold = *a;
  }
  if (auto it = j.find("gold_objects"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw Error(ErrorCode::SchemaError, "gold_objects must be a list");
    ex.gold_objects = it->get<std::set<std::string>>();
  }
  if (ex.gold && ex.gold_objects) throw Error(ErrorCode::SchemaError, "gold and gold_objects are mutually exclusive");
  if (auto it = j.find("hallucination_targets"); it != j.end() && !it->is_null()) {
    ex.hallucination_targets = it->get<std::set<std::string>>();
  }
  if (auto it = j.find("group_keys"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw Error(ErrorCode::SchemaError, "group_keys must be an object");
    for (const auto& [k, v] : it->items()) ex.group_keys.emplace(k, scalar_string(v));
  }
  if (auto it = j.find("initial_answer"); it != j.end() && !it->is_null()) ex.initial_answer = it->get<std::string>();
  return ex;
}

void write_unified(const std::filesystem::path& path, const std::vector<DatasetExample>& examples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& ex : examples) out << to_json(ex).dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

}  // namespace atomcal
