#pragma once

// Prompt templates for every model call. Slots are written {name}; braces
// that do not name a supplied slot are copied through unchanged.

#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

namespace vitaudit::prompts {

using Slot = std::pair<std::string_view, std::string_view>;

/// Single-pass substitution: slot values are never re-scanned.
std::string render(std::string_view tmpl, std::initializer_list<Slot> slots);

// Decomposition. Slots: {response}; {instruction}, {marked_response};
// {instruction}, {cleaned_response}.
extern const std::string_view kSemanticTagging;
extern const std::string_view kVisualDistillation;
extern const std::string_view kFluentSynthesis;

// Rubrics. Slots: {text_to_evaluate}; {text_to_evaluate}; {text_input}.
extern const std::string_view kLogicRubric;
extern const std::string_view kKnowledgeRubric;
extern const std::string_view kVisionRubric;

// Defect injection. Slots: {text_to_analyze}; {error_options_text},
// {text_to_analyze}; {prompt_instruction}, {original_text}.
extern const std::string_view kContentAnalysis;
extern const std::string_view kSubtypeSelection;
extern const std::string_view kDefectGeneration;
/// Sent as the system message alongside kDefectGeneration.
extern const std::string_view kDefectGenerationSystem;

}  // namespace vitaudit::prompts
