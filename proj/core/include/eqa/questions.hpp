#pragma once

#include "eqa/env_model.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace eqa::episodes {

enum class QuestionType : uint8_t { Location, Color, ColorRoom };

std::string_view name(QuestionType t);
QuestionType parse_question_type(std::string_view s);

struct Question {
  QuestionType qtype = QuestionType::Color;
  std::string template_text;
  std::string env_id;
  uint32_t target_object_id = 0;
  uint32_t target_room_id = 0;  // 0 unless qtype == ColorRoom
  std::string answer;

  // Template and slot values without the answer, e.g. "color_room|sofa|bedroom".
  std::string signature() const;
};

// All questions an environment supports under the uniqueness rules: location
// and color need the category to occur once in the environment, color_room
// needs the (category, room type) pair to occur once.
std::vector<Question> instantiate_questions(const env::Environment& env);

// Answer entropy divided by ln(min(n, V)) where n is the number of samples
// and V the answer-space size; 0 when min(n, V) < 2.
double normalized_entropy(const std::map<std::string, int>& counts, std::size_t answer_space);

// Answer-space size for a question type (18 room types or 24 colours).
std::size_t answer_space(QuestionType t);

struct QuestionFilterStats {
  std::map<std::string, double> entropy_by_signature;
  std::size_t instantiated = 0;
  std::size_t kept = 0;
};

// Instantiates every environment and keeps questions whose signature has a
// normalized answer entropy >= threshold across the set.
std::vector<Question> generate_questions(std::span<const env::Environment* const> envs,
                                         double entropy_threshold,
                                         QuestionFilterStats* stats = nullptr);

// Same filter applied to already instantiated questions.
std::vector<Question> filter_by_entropy(const std::vector<Question>& questions,
                                        double entropy_threshold,
                                        QuestionFilterStats* stats = nullptr);

}  // namespace eqa::episodes
