#include "vitaudit/prompts.hpp"

#include <algorithm>

namespace vitaudit::prompts {

std::string render(std::string_view tmpl, std::initializer_list<Slot> slots) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const auto open = tmpl.find('{', i);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    out.append(tmpl.substr(i, open - i));
    const auto close = tmpl.find('}', open + 1);
    if (close != std::string_view::npos) {
      const auto name = tmpl.substr(open + 1, close - open - 1);
      const auto it = std::find_if(slots.begin(), slots.end(), [&](const Slot& s) { return s.first == name; });
      if (it != slots.end()) {
        out.append(it->second);
        i = close + 1;
        continue;
      }
    }
    out.push_back('{');
    i = open + 1;
  }
  return out;
}

const std::string_view kSemanticTagging = R"(Response: {response}

Your task is to precisely insert <INFER> for subjective judgments and <KNOW> for external knowledge.

Critical Guidelines for Annotation:
1. Tag the Complete Thought: Precisely wrap the shortest, complete phrase that conveys the entire logical idea (like a cause-and-effect statement) or the full piece of external information.
2. Tag Interpretations of Effect/Cause: Always tag phrases that describe the effect, purpose, or reason for a visual element.
3. Strictly Visual is NOT Tagged: DO NOT tag objective, verifiable descriptions of visual facts.
4. Do Not Change Words: Do not add, delete, or rephrase any original words, like Visible Text or Numbers.
5. Output Format: Your response must start with the prefix "Marked Response:".

Examples:

Input: The lighting in the room is soft, creating a cozy atmosphere. The design suggests it is from the Victorian era.
Output: Marked Response: The lighting in the room is soft, <INFER>creating a cozy atmosphere</INFER>. <INFER>The design suggests it is from the Victorian era</INFER>.

Input: This is a 1976 postage stamp from Hungary, a country in Central Europe.
Output: Marked Response: This is a 1976 postage stamp from Hungary, <KNOW>a country in Central Europe</KNOW>.

Input: The image shows a can of Coca-Cola.
Output: Marked Response: The image shows a can of Coca-Cola.)";

const std::string_view kVisualDistillation = R"(Instruction: {instruction}
Annotated Response: {marked_response}

Task: Process the "Annotated Response" by modifying ONLY the segments wrapped in <INFER>...</INFER> or <KNOW>...</KNOW> tags.
- Rewrite or entirely remove tagged segments to leave only what is directly and objectively visible in the image.
- Crucially, all content NOT wrapped in tags MUST be preserved exactly as is, without any modification.

Guidelines:
1. Rewrite When Possible: If a tagged idea can be rephrased as a neutral, objective, image-based description, rewrite it and remove the tags. For example, change "<INFER>creating a cozy atmosphere</INFER>" to "which illuminates the scene."
2. Delete When Necessary: For clearly irrelevant or purely speculative content that cannot be visually confirmed, delete the entire tagged segment (including the tags).
3. No New Information: DO NOT introduce any new guesses, opinions, or visual details that were not already present in the untagged parts of the original response.
4. Output Format: Your response must start with the prefix "Cleaned Response:".

Example:
Input Annotated Response:
A person wearing sunglasses stands under a tree. <INFER>She must be shielding her eyes from harsh sunlight.</INFER> Leaves are scattered on the ground. <KNOW>This park is famous for its autumn foliage tours.</KNOW>

Output:
Cleaned Response: A person wearing sunglasses stands under a tree. Leaves are scattered on the ground.)";

const std::string_view kFluentSynthesis = R"(Instruction: {instruction}
Cleaned Response: {cleaned_response}

Task: Rephrase the "Cleaned Response" into a single, cohesive, and purely visual description.

Guidelines:
1. Strictly Adhere to Input: Your output MUST be a faithful reorganization of ONLY the information present in the "Cleaned Response."
2. Preserve All Details: Do not omit any visual information. Every object, attribute, and spatial relation from the input must be represented in your summary.
3. No New Content or Inference: Crucially, DO NOT add any new visual details, reasoning, assumptions, or subjective/interpretive language (e.g., "beautiful", "seems like", "creates a sense of"). Your job is to describe, not to analyze.
4. Improve Flow: Focus on improving sentence structure and grammatical correctness to create a natural-sounding paragraph.
5. Output Format: Your response must start with the prefix "Visual Summary:".

Example:
Input Cleaned Response: A white cat is on a windowsill. The background shows buildings. Light is coming through the window.
Output:
Visual Summary: A white cat sits on a windowsill where bright light is streaming in. Buildings are visible in the background.)";

const std::string_view kLogicRubric = R"(Input Text for Evaluation: {text_to_evaluate}

Task: You are an AI assistant designed to evaluate the correctness of logical reasoning. Your primary focus is to rigorously scrutinize the logical soundness and validity of the reasoning contained ONLY within the <INFER>...</INFER> tags, based on the visual evidence in the image.

Evaluation and Scoring Rules:
1. Isolate and Evaluate: Focus exclusively on the statements inside the <INFER> tags.
2. Assess Plausibility against Image: Judge if the inference is a logical and plausible conclusion derived from the visual information in the image.
3. Output Format:
   - Score: integer 1-5
   - Explanation: A brief evaluation of the logical rigor, noting key flaws or strengths.

Scoring Rubric:
Score 1: Grossly Illogical or Baseless. The inference is pure speculation with no connection to the image (e.g., predicting the future from a photo of a cat), or it's self-contradictory.
Score 2: Significant Logical Gaps. The inference is a major leap in logic. While loosely related to the image, it is highly unlikely or requires many unsupported assumptions. (e.g., "A person is running, <INFER>so this must be a professional athlete training for the Olympics</INFER>." )
Score 3: Plausible but Unprovable. The inference is reasonable and could be true, but it is not strongly supported by visual evidence and remains a subjective interpretation. (e.g., "The room is dim, <INFER>creating a sad atmosphere</INFER>." )
Score 4: Logically Sound. The inference is very likely correct and follows directly from strong visual evidence, with only very minor room for doubt. (e.g., "The man holds an umbrella, <INFER>suggesting it is raining or about to rain</INFER>." )
Score 5: Logically Airtight. The inference is an undeniable conclusion based on the visual facts and common-sense logic; it is virtually irrefutable. (e.g., "The wreck shows a crushed car, <INFER>indicating a high-impact collision occurred</INFER>." ))";

const std::string_view kKnowledgeRubric = R"(Input Text for Evaluation: {text_to_evaluate}

Task: You are an expert fact-checking assistant. Your task is to evaluate the factual correctness of the information contained ONLY within the <KNOW>...</KNOW> tags. Base your assessment on your internal, general knowledge.

Output Format:
Score: integer 1-5
Explanation: A brief justification for your score, specifying which facts are correct or incorrect.

Scoring Rubric:
Score 1: Entirely Incorrect or Fabricated. The information is factually wrong, nonsensical, or a complete fabrication (e.g., contains imaginary objects like the 'Luminara Scepter').
Score 2: Largely Incorrect. Contains a core factual error, even if minor details are correct. (e.g., "<KNOW>Paris, the capital of England...</KNOW>"). The presence of a single major error means the score cannot be higher than 2.
Score 3: Partially Correct but Misleading. Contains a mix of correct and incorrect information, or the information is technically correct but presented in a highly misleading context.
Score 4: Mostly Correct. The core assertion is factually sound but contains a minor, non-critical inaccuracy (e.g., a slightly wrong year, a minor detail about a standard feature).
Score 5: Fully Correct and Accurate. Every single claim within the tags is factually sound, precise, and widely accepted.)";

const std::string_view kVisionRubric = R"(Input Text: {text_input}

Task: You are a visual consistency scoring assistant. Your task is to evaluate whether the extracted text description’s assertions can be verified by the given image. Only assess consistency, not completeness: do NOT penalize the description for omitting image details, but DO penalize any assertions that contradict or cannot be supported by the image.

CORE SCORING GUIDELINE: Be decisive in your scoring. If the description is fully and accurately supported by the image without any errors, the score must be 5. Do not default to 4 if a 5 is warranted.

Output Format:
Score: integer 1-5
Explanation: Brief justification, indicating which assertions are verifiable and which are inconsistent or unclear.

Scoring Rubric:
Score 1: Severely inconsistent or completely unrelated. Most or all assertions contradict the image.
Score 2: Largely inconsistent. Only one or two minor assertions can be matched to the image.
Score 3: Partially consistent. Some key assertions align with the image, but others are vague, potentially incorrect, or unsupported.
Score 4: Mostly consistent. The bulk of assertions are supported by the image, but there is at least one minor imprecision or slight unsupported detail that does not mislead. Use this score for responses that are good but not perfect.
Score 5: Fully consistent and accurate. Every single assertion in the text is clearly and precisely verifiable in the image. There are no unsupported or contradictory claims. If all claims are verified, you MUST assign this score.)";

const std::string_view kContentAnalysis = R"(You are a text analysis expert. Analyze the following text and
determine if it contains a) logical reasoning, inference, or
conclusion, and b) specific external knowledge (like names of people,
places, brands, historical facts).

Respond ONLY with a JSON object with two boolean keys:

{"contains_reasoning": boolean, "contains_knowledge": boolean}.

Text to analyze:
"{text_to_analyze}")";

const std::string_view kSubtypeSelection = R"(You are a text analysis expert. Your task is to select the single best error-injection strategy for the "Original Text" from the "Available Options".

Available Options:
{error_options_text}

Original Text:
"{text_to_analyze}"

Analyze the text and choose the error code from the options that is most relevant to the text's content. Respond ONLY with a JSON object containing your choice.)";

const std::string_view kDefectGeneration = R"(Instruction: {prompt_instruction}
Original Text to Corrupt: "{original_text}")";

const std::string_view kDefectGenerationSystem =
    "You MUST provide ONLY the corrupted/rewritten text as the output. Do not include any preambles, explanations, "
    "or wrappers like 'Rewritten Text:' or the original response in your final output.";

}  // namespace vitaudit::prompts
