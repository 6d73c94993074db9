"""Prompt templates.

All model-facing wording lives here so tests can script exact matches.
Templates are str.format strings; slot names double as documentation of
what each caller must supply.
"""

from __future__ import annotations

# --- agent prompts (ready / ask / predict), plain and chain-of-thought ---

READY_PROMPT = """\
Eligibility requirements: {eligibility_requirements}.

Is the information sufficient to determine whether any member of the user's household is eligible for all programs? Answer only in one word True or False."""

PREDICT_PROMPT = """\
Eligibility: {eligibility_requirements}.

Predict the programs for which any member of the user's household is eligible. Return only a boolean array of length {num_programs}, e.g. {example_array}, where the value at index `i` is true iff the user is eligible for program `i`. Only return the array. Do not return anything else in the response. If a user's eligibility is unclear, make your best guess."""

ASK_PROMPT = """\
Eligibility: {eligibility_requirements}.

Ask a clarifying question that will help you determine if any member of the user's household is eligible for benefits as efficiently as possible. Only ask about one fact at a time."""

READY_COT_PROMPT = """\
Eligibility requirements: {eligibility_requirements}.

Is the information sufficient to determine whether any member of the user's household is eligible for all programs? Think through your reasoning out loud. Then answer with True or False."""

PREDICT_REASONING_COT_PROMPT = """\
Eligibility: {eligibility_requirements}.

Predict the programs for which any member of the user's household is eligible. Return only a boolean array of length {num_programs}, e.g. {example_array}, where the value at index `i` is true iff the user is eligible for program `i`. Only return the array. Do not return anything else in the response. If a user's eligibility is unclear, make your best guess. Think through your reasoning out loud."""

PREDICT_CONSTRAINED_COT_PROMPT = """\
Reasoning: {reasoning}.

Using the reasoning above, predict the programs for which any member of the user's household is eligible. Output a boolean array of length {num_programs}, e.g. {example_array}, where the value at index `i` is true iff the user is eligible for program `i`. If a user's eligibility is unclear, make your best guess."""

ASK_REACT_COT_PROMPT = """\
Eligibility: {eligibility_requirements}.

Ask a clarifying question that will help you determine if any member of the user's household is eligible for benefits as efficiently as possible. Only ask about one fact at a time. Think through your reasoning out loud, then state your question after a colon, e.g. Question: What is the user's age?"""

# --- checker synthesis prompts ---

GENERATE_CHECKER_PROMPT = """\
{attempt_no}

Eligibility Requirements:
{eligibility_requirement}

Write a python function called check_eligibility that takes a dictionary hh containing relevant information and determines user eligibility. hh is a special dictionary connected to a language model that is conversing with the user. Any time it does not contain a key, it will determine that information from the user. As a result here are some requirements for interacting with hh:

- DO NOT use dict.get() anywhere in the code. Key errors will be handled elsewhere.
- Do not use default values.
- Do not use any f-strings, curly brackets, or dynamically generated strings in your keys.
- Use only literal strings in keys.
- Do not use try-except blocks.
- If you need to access data for individuals (rather than the household as a whole) you can use integer indexing. hh[0] is the head of the household.

check_eligibility returns a bool. All keys and values of hh are strings. If you write helper functions, keep them inside the check_eligibility function. Make your code as detailed as possible capturing every edge case. Remember that the household may have no relevant members, so be sure to ask about the composition of the household. For example, for childcare programs, check that the household has at least one child. After each new lookup in hh, write a comment suggesting a question to ask.

The following is a set of preexisting keys and values in the hh dictionary; take care not to duplicate them.

{preexisting_keys}

Avoid using int() and use float() instead. Do not provide anything besides code in your response. Do not use input for user input."""

# Appended to GENERATE_CHECKER_PROMPT: the emission must fit the restricted
# grammar the parser accepts, so it is machine-checkable.
CHECKER_GRAMMAR_NOTE = """\
Emit only the body of the check, in this restricted form, with no function definition around it. Statements: `if <condition> { ... } else { ... }`, `return <expression>`, `let <name> = <expression>`, and `for member in household { ... }` to range over household members. Expressions: comparisons (<, <=, ==, !=, >=, >), arithmetic (+, -, *, /), numeric, boolean, and string literals, and lookups hh["key"] for household facts, member["key"] inside a member loop, or hh[i]["key"] for a specific member. The words and, or, and not do not exist: write conjunctions as nested if statements and negation as a comparison with false. Every execution path must end in a return of a boolean."""

GET_TYPE_PROMPT = """\
Context:
{eligibility_requirements}

Code:
{code}

Target key:
{key}

Question: Given the code and context above, what do you expect {key} to be an integer, a float, or one choice from a set of strings? Return ONLY int, float, or choice."""

GET_VALUES_PROMPT = """\
Context:
{eligibility_requirements}

Code:
{code}

Target key:
{key}

Question: Given the code and context above, what are the possible values of {key}? Return ONLY the list of possible values in a list of strings. For example, return ["a", "b", "c"]."""

# --- dialog prompts: answer extraction and question formulation ---

EXTRACT_VALUE_PROMPT = """\
Context:
{eligibility_requirements}

Line:
```{line}```

We need to extract the value of {key} from the following dialog:

Question: {cq}
Answer: {answer}

What should we set as the value of {key}? Return ONLY the value."""

KEY_ERROR_PROMPT = """\
Context:
{eligibility_requirements}

Line:
```{line}```

We need to determine what value of {key} should be stored in the hh dictionary. Ask a question to the user that would get this value. For example, for age_i, ask "What is the age of person i?". Return ONLY the question."""


def render_example_array(length: int) -> str:
    """Example boolean array for the predict prompts, sized to the ask."""
    if length < 1:
        raise ValueError("example array needs at least one entry")
    return "[" + ", ".join("true" if i % 2 == 0 else "false" for i in range(length)) + "]"
