"""Prompt texts sent to language-model backends.

The version string participates in every cache key, so editing any prompt
invalidates cached responses by construction.
"""

PROMPT_VERSION = "v1"

SAME_SOFTWARE_PROMPT = (
    "Your task is to determine if the two computer screens focus on the same software.\n"
    "For each screen, first identify the software it is focused on in the front, "
    "e.g., Google Chrome, VSCode, Finder, etc.\n"
    "Then, compare the software on the two screens. If they are the same, output "
    "'YES'. Otherwise, output 'NO'."
)

CONSISTENCY_PROMPT = (
    "Your task is to determine if the action sequence aligns with the task goal. "
    "The actions may not have achieved the goal yet, return 'YES' as long as it "
    "attempts to progress towards the goal. If no action sequence is provided, "
    "return 'YES'."
)

MODULARITY_PROMPT = (
    "Evaluate whether the current task-solving step is clearly focused on causally "
    "consistent procedures or achieving the same final goal, instead of a "
    "concatenation of multiple distinct topics or interfaces."
)

SUMMARIZE_STEP_PROMPT = (
    "Summarize the goal that the following low-level computer actions accomplish, "
    "as one short imperative phrase (at most ten words). Output only the phrase."
)

SUMMARIZE_PARENT_PROMPT = (
    "The following sub-goals were carried out in order as parts of one larger step. "
    "Summarize their shared goal as one short imperative phrase (at most ten "
    "words). Output only the phrase."
)

MATCH_STEPS_PROMPT = (
    "You are given the step goals of two workflows that solve the same task. "
    "Match steps that accomplish the same sub-goal. A match may pair a contiguous "
    "interval of steps on one side with an interval on the other; leave unrelated "
    "steps unmatched, and never reuse a step in two matches.\n"
    "Output JSON only: {\"pairs\": [{\"a\": [start, end], \"b\": [start, end]}, ...]} "
    "with 0-based inclusive step intervals."
)

BY_KIND = {
    "same_software": SAME_SOFTWARE_PROMPT,
    "consistency": CONSISTENCY_PROMPT,
    "modularity": MODULARITY_PROMPT,
    "match_steps": MATCH_STEPS_PROMPT,
}
