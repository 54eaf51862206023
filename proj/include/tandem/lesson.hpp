#pragma once

#include "tandem/types.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace tandem {

struct LessonCard
{
  std::size_t index = 0;
  std::string content;
  /// Prompts and translation for the student, keyed by language.
  std::map<Language, std::string> student_prompt;
  /// Instructions for the teacher, keyed by language.
  std::map<Language, std::string> teacher_prompt;
};

struct Lesson
{
  std::string lesson_id;
  Language language;
  std::string level;
  std::vector<LessonCard> cards;

  std::size_t size() const noexcept { return cards.size(); }
};

/// Parses a lesson document and validates dense card indices, a non-empty
/// card list and at least one prompt per role on every card.
Lesson parse_lesson(const std::string& text);
Lesson load_lesson(const std::filesystem::path& path);

/// Picks `prompts[lang]`, falling back to English and then to the first
/// entry. Returns (language, text).
std::pair<Language, std::string> pick_prompt(const std::map<Language, std::string>& prompts,
                                             const Language& lang);

class LessonLibrary
{
public:
  void add(Lesson lesson);
  /// Loads every *.json file in `dir`; returns how many were loaded.
  std::size_t load_dir(const std::filesystem::path& dir);

  /// Exact (language, level) match, else the first lesson of that language
  /// by id. Throws NoLesson when the language has none.
  std::shared_ptr<const Lesson> find(const Language& language, const std::string& level) const;
  std::shared_ptr<const Lesson> by_id(const std::string& lesson_id) const;
  std::size_t size() const noexcept { return lessons_.size(); }

  /// A small built-in lesson per language, used when no lesson files are given.
  static LessonLibrary builtin();

private:
  std::map<std::string, std::shared_ptr<const Lesson>> lessons_;
};

} // namespace tandem
