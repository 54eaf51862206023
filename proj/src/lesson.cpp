#include "tandem/lesson.hpp"

#include "tandem/error.hpp"

#include "json.hpp"

#include <array>
#include <fstream>
#include <sstream>

namespace tandem {

using json = nlohmann::json;

namespace {

std::map<Language, std::string> prompt_map(const json& j, const std::string& where)
{
  if (!j.is_object() || j.empty())
    fail(Errc::InvalidLesson, where + " needs at least one language entry");
  std::map<Language, std::string> out;
  for (const auto& [lang, text] : j.items())
    {
      if (!text.is_string())
        fail(Errc::InvalidLesson, where + "." + lang + " must be text");
      out.emplace(lang, text.get<std::string>());
    }
  return out;
}

} // namespace

Lesson parse_lesson(const std::string& text)
{
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    fail(Errc::InvalidLesson, "not a JSON object");
  Lesson lesson;
  try
    {
      lesson.lesson_id = j.at("lesson_id").get<std::string>();
      lesson.language = j.at("language").get<std::string>();
      lesson.level = j.at("level").get<std::string>();
      const json& cards = j.at("cards");
      if (!cards.is_array() || cards.empty())
        fail(Errc::InvalidLesson, lesson.lesson_id + ": cards must be a non-empty list");
      for (const json& c : cards)
        {
          LessonCard card;
          card.index = c.at("index").get<std::size_t>();
          const std::string where = lesson.lesson_id + ".cards[" + std::to_string(card.index) + "]";
          if (card.index != lesson.cards.size())
            fail(Errc::InvalidLesson, where + ": indices must be dense from 0");
          card.content = c.at("content").get<std::string>();
          card.student_prompt = prompt_map(c.at("student_prompt"), where + ".student_prompt");
          card.teacher_prompt = prompt_map(c.at("teacher_prompt"), where + ".teacher_prompt");
          lesson.cards.push_back(std::move(card));
        }
    }
  catch (const json::exception& e)
    {
      fail(Errc::InvalidLesson, e.what());
    }
  if (lesson.lesson_id.empty() || lesson.language.empty())
    fail(Errc::InvalidLesson, "lesson_id and language are required");
  return lesson;
}

Lesson load_lesson(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    fail(Errc::InvalidLesson, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try
    {
      return parse_lesson(ss.str());
    }
  catch (const Error& e)
    {
      fail(Errc::InvalidLesson, path.filename().string() + ": " + e.detail());
    }
}

std::pair<Language, std::string> pick_prompt(const std::map<Language, std::string>& prompts,
                                             const Language& lang)
{
  if (auto it = prompts.find(lang); it != prompts.end())
    return *it;
  if (auto it = prompts.find("en"); it != prompts.end())
    return *it;
  return *prompts.begin();
}

void LessonLibrary::add(Lesson lesson)
{
  auto id = lesson.lesson_id;
  lessons_[id] = std::make_shared<const Lesson>(std::move(lesson));
}

std::size_t LessonLibrary::load_dir(const std::filesystem::path& dir)
{
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".json")
      {
        add(load_lesson(entry.path()));
        ++n;
      }
  return n;
}

std::shared_ptr<const Lesson> LessonLibrary::find(const Language& language,
                                                  const std::string& level) const
{
  std::shared_ptr<const Lesson> fallback;
  for (const auto& [id, lesson] : lessons_)
    {
      if (lesson->language != language)
        continue;
      if (lesson->level == level)
        return lesson;
      if (!fallback)
        fallback = lesson;
    }
  if (!fallback)
    fail(Errc::NoLesson, "no lesson for language " + language);
  return fallback;
}

std::shared_ptr<const Lesson> LessonLibrary::by_id(const std::string& lesson_id) const
{
  auto it = lessons_.find(lesson_id);
  if (it == lessons_.end())
    fail(Errc::NoLesson, lesson_id);
  return it->second;
}

LessonLibrary LessonLibrary::builtin()
{
  struct Phrase
  {
    const char* content;
    const char* gloss;
  };
  struct Course
  {
    const char* language;
    std::array<Phrase, 8> phrases;
  };
  static const std::array<Course, 4> courses{{
      {"en",
       {{{"Hello! How are you?", "Hello! How are you?"},
         {"My name is ...", "My name is ..."},
         {"Where are you from?", "Where are you from?"},
         {"I live in ...", "I live in ..."},
         {"What do you do?", "What do you do?"},
         {"I like to read and travel.", "I like to read and travel."},
         {"Can you say that again, please?", "Can you say that again, please?"},
         {"Nice to meet you. See you soon!", "Nice to meet you. See you soon!"}}}},
      {"es",
       {{{"¡Hola! ¿Cómo estás?", "Hello! How are you?"},
         {"Me llamo ...", "My name is ..."},
         {"¿De dónde eres?", "Where are you from?"},
         {"Vivo en ...", "I live in ..."},
         {"¿A qué te dedicas?", "What do you do?"},
         {"Me gusta leer y viajar.", "I like to read and travel."},
         {"¿Puedes repetirlo, por favor?", "Can you say that again, please?"},
         {"Encantado de conocerte. ¡Hasta pronto!", "Nice to meet you. See you soon!"}}}},
      {"ru",
       {{{"Привет! Как дела?", "Hello! How are you?"},
         {"Меня зовут ...", "My name is ..."},
         {"Откуда ты?", "Where are you from?"},
         {"Я живу в ...", "I live in ..."},
         {"Чем ты занимаешься?", "What do you do?"},
         {"Я люблю читать и путешествовать.", "I like to read and travel."},
         {"Повтори, пожалуйста.", "Can you say that again, please?"},
         {"Приятно познакомиться. До встречи!", "Nice to meet you. See you soon!"}}}},
      {"de",
       {{{"Hallo! Wie geht es dir?", "Hello! How are you?"},
         {"Ich heiße ...", "My name is ..."},
         {"Woher kommst du?", "Where are you from?"},
         {"Ich wohne in ...", "I live in ..."},
         {"Was machst du beruflich?", "What do you do?"},
         {"Ich lese und reise gern.", "I like to read and travel."},
         {"Kannst du das bitte wiederholen?", "Can you say that again, please?"},
         {"Schön, dich kennenzulernen. Bis bald!", "Nice to meet you. See you soon!"}}}},
  }};

  LessonLibrary lib;
  for (const Course& course : courses)
    {
      Lesson lesson;
      lesson.language = course.language;
      lesson.level = "A1";
      lesson.lesson_id = std::string(course.language) + "-a1-first-conversation";
      for (std::size_t k = 0; k < course.phrases.size(); ++k)
        {
          LessonCard card;
          card.index = k;
          card.content = course.phrases[k].content;
          card.student_prompt["en"] = std::string("Translation: ") + course.phrases[k].gloss;
          card.teacher_prompt["en"] = k + 1 < course.phrases.size()
                                          ? "Read the phrase aloud and ask the student to repeat it."
                                          : "Last card: ask the student to use the phrase to say goodbye.";
          lesson.cards.push_back(std::move(card));
        }
      lib.add(std::move(lesson));
    }
  return lib;
}

} // namespace tandem
