#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace debateqd {

/// Prompt templates with `{name}` placeholders.
struct Templates {
  std::string debater;
  std::string judge;
  std::string persuasion_mutator;
  std::string truth_mutator;
  std::string staticgen;

  /// The templates shipped in data/templates, compiled into the binary.
  static Templates builtin();
  /// Reads debater.txt, judge.txt, persuasion_mutator.txt, truth_mutator.txt
  /// and staticgen.txt from `dir`; files that are absent keep the builtin text.
  static Templates load_dir(const std::filesystem::path& dir);
};

/// Single-pass substitution of `{identifier}` placeholders (identifier is
/// [A-Za-z_][A-Za-z0-9_]*). Braces that do not form a placeholder, such as
/// the JSON answer skeleton in the mutator templates, are copied verbatim.
/// Substituted values are never rescanned. Throws ConfigError naming any
/// placeholder without a value.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

}  // namespace debateqd
