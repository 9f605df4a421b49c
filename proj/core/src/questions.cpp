#include "eqa/questions.hpp"

#include "eqa/error.hpp"

#include <algorithm>
#include <cmath>

namespace eqa::episodes {
namespace {

std::string object_text(env::Category c) {
  std::string s(env::name(c));
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}

std::string room_text(env::RoomType r) {
  std::string s(env::name(r));
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}

}  // namespace

std::string_view name(QuestionType t) {
  switch (t) {
    case QuestionType::Location: return "location";
    case QuestionType::Color: return "color";
    case QuestionType::ColorRoom: return "color_room";
  }
  return "?";
}

QuestionType parse_question_type(std::string_view s) {
  if (s == "location") return QuestionType::Location;
  if (s == "color") return QuestionType::Color;
  if (s == "color_room") return QuestionType::ColorRoom;
  throw DataError("unknown question type " + std::string(s));
}

std::size_t answer_space(QuestionType t) {
  return t == QuestionType::Location ? env::kNumRoomTypes : env::kNumColors;
}

std::string Question::signature() const {
  // The template text already carries the object and room slots.
  return std::string(name(qtype)) + "|" + template_text;
}

std::vector<Question> instantiate_questions(const env::Environment& env) {
  std::map<env::Category, int> category_count;
  std::map<std::pair<env::Category, env::RoomType>, int> pair_count;
  for (const auto& o : env.objects) {
    ++category_count[o.category];
    ++pair_count[{o.category, env.room(o.room_id).room_type}];
  }
  std::vector<Question> out;
  for (const auto& o : env.objects) {
    const auto& room = env.room(o.room_id);
    const std::string obj = object_text(o.category);
    if (category_count[o.category] == 1) {
      out.push_back({QuestionType::Location, "What room is the " + obj + " located in?", env.id,
                     o.object_id, 0, std::string(env::name(room.room_type))});
      out.push_back({QuestionType::Color, "What color is the " + obj + "?", env.id, o.object_id, 0,
                     std::string(env::name(o.color_name))});
    }
    if (pair_count[{o.category, room.room_type}] == 1) {
      out.push_back({QuestionType::ColorRoom,
                     "What color is the " + obj + " in the " + room_text(room.room_type) + "?",
                     env.id, o.object_id, room.room_id, std::string(env::name(o.color_name))});
    }
  }
  return out;
}

double normalized_entropy(const std::map<std::string, int>& counts, std::size_t space) {
  double n = 0.0;
  for (const auto& [_, c] : counts) n += c;
  const double support = std::min(n, static_cast<double>(space));
  if (support < 2.0) return 0.0;
  double h = 0.0;
  for (const auto& [_, c] : counts) {
    if (c > 0) {
      const double p = c / n;
      h -= p * std::log(p);
    }
  }
  return h / std::log(support);
}

std::vector<Question> filter_by_entropy(const std::vector<Question>& questions, double threshold,
                                        QuestionFilterStats* stats) {
  std::map<std::string, std::map<std::string, int>> dist;
  std::map<std::string, QuestionType> type_of;
  for (const auto& q : questions) {
    ++dist[q.signature()][q.answer];
    type_of[q.signature()] = q.qtype;
  }
  std::map<std::string, double> entropy;
  for (const auto& [sig, counts] : dist) {
    entropy[sig] = normalized_entropy(counts, answer_space(type_of[sig]));
  }
  std::vector<Question> out;
  for (const auto& q : questions) {
    if (entropy[q.signature()] >= threshold) out.push_back(q);
  }
  if (stats) {
    stats->entropy_by_signature = entropy;
    stats->instantiated = questions.size();
    stats->kept = out.size();
  }
  return out;
}

std::vector<Question> generate_questions(std::span<const env::Environment* const> envs,
                                         double threshold, QuestionFilterStats* stats) {
  if (envs.size() < 2) throw ConfigError("question filtering needs at least two environments");
  std::vector<Question> all;
  for (const auto* env : envs) {
    auto qs = instantiate_questions(*env);
    all.insert(all.end(), qs.begin(), qs.end());
  }
  return filter_by_entropy(all, threshold, stats);
}

}  // namespace eqa::episodes
