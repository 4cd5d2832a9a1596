#include "debateqd/templates.hpp"

#include <cctype>

#include "debateqd/embedded_data.hpp"
#include "debateqd/error.hpp"
#include "debateqd/util.hpp"

namespace debateqd {

Templates Templates::builtin() {
  return Templates{std::string(embedded::debater_template), std::string(embedded::judge_template),
                   std::string(embedded::persuasion_mutator_template),
                   std::string(embedded::truth_mutator_template), std::string(embedded::staticgen_template)};
}

Templates Templates::load_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("template directory not found: " + dir.string());
  Templates t = builtin();
  auto maybe = [&](const char* name, std::string& slot) {
    const auto path = dir / name;
    if (std::filesystem::exists(path)) slot = read_file(path);
  };
  maybe("debater.txt", t.debater);
  maybe("judge.txt", t.judge);
  maybe("persuasion_mutator.txt", t.persuasion_mutator);
  maybe("truth_mutator.txt", t.truth_mutator);
  maybe("staticgen.txt", t.staticgen);
  return t;
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  auto ident_start = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
  auto ident_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{' && i + 1 < tmpl.size() && ident_start(tmpl[i + 1])) {
      std::size_t j = i + 1;
      while (j < tmpl.size() && ident_char(tmpl[j])) ++j;
      if (j < tmpl.size() && tmpl[j] == '}') {
        const std::string name(tmpl.substr(i + 1, j - i - 1));
        const auto it = values.find(name);
        if (it == values.end()) throw ConfigError("template placeholder {" + name + "} has no value");
        out += it->second;
        i = j + 1;
        continue;
      }
    }
    out += tmpl[i++];
  }
  return out;
}

}  // namespace debateqd
