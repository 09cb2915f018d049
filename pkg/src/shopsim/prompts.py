"""System-prompt templates for both agents and the prompt assembly operation.

The shopper template carries four placeholders: {recommendation_example},
{domain_knowledge}, {persona}, {preferences}. Per-category in-context
reasoning examples and domain knowledge are fixed here; the salesperson
prompt is configuration for a fixed backend, not a subject of evaluation.
"""

from __future__ import annotations

import re

from .catalog import Persona, format_money
from .errors import ConfigurationError

__all__ = [
    "CATEGORIES",
    "category_label",
    "BASE_SHOPPER_TEMPLATE",
    "HUMAN_STEERING_ADDENDUM",
    "SALESBOT_TEMPLATE",
    "assemble_shopper_prompt",
    "assemble_salesbot_prompt",
]

CATEGORIES = (
    "female_clothing",
    "male_clothing",
    "rings",
    "smart_watch",
    "cars",
    "games",
)

_LABELS = {
    "female_clothing": "Female Clothing",
    "male_clothing": "Male Clothing",
    "rings": "Rings",
    "smart_watch": "Smart Watch",
    "cars": "Cars",
    "games": "Games",
}


def category_label(category: str) -> str:
    return _LABELS.get(category, category.replace("_", " ").title())


BASE_SHOPPER_TEMPLATE = """\
You are shopping online for a product at a store, and are communicating with a digital salesperson via a chat interface to learn more about the store's offerings to make an informed decision.
Some rules to follow:
- When the salesperson makes a recommendation, please consider whether the product satisfies your assigned preferences and dealbreakers, and decide to either buy or keep looking based on that.
{recommendation_example}
- If you would like to accept or buy a product, call the add_to_cart function with the product name as the parameter.
- You can end the conversation at any time by calling the end_conversation function. You MUST call this function to end the conversation.
- You are willing to accept products that satisfy your dealbreakers but not your preferences, although products that satisfy both are preferred.
{domain_knowledge}
Here is your persona.
{persona}
Your preferences and dealbreakers:
{preferences}
"""

HUMAN_STEERING_ADDENDUM = """
Speak the way a real person shopping online would: keep messages short and casual, use everyday words, and do not list every requirement at once. Start with a rough idea of what you want and only bring up more details when the salesperson asks or when a recommendation makes them relevant.
"""

RECOMMENDATION_EXAMPLES = {
    "smart_watch": (
        "Here's an example. <reasoning>Preferences: I prefer a smartwatch with GPS features. "
        "Dealbreakers: I cannot exceed $100. Let me check each of the products step by step, "
        "first with dealbreakers then preferences. Let us start with the Mas watch. The only "
        "dealbreaker is that it is $100. Since the watch is $120, this is over the budget and "
        "disqualifies the watch. Let us consider the Destiny watch. The only dealbreaker is "
        "that it is $100. Since the watch is $90, this is in budget. The only preference is "
        "for GPS, which the Destiny watch does not have. However, since it fulfills all "
        "dealbreakers I will still add to cart. Since GPS features are a preference and it "
        "satisfies all dealbreakers, it is acceptable for Alex.</reasoning>Great! I will take "
        "it the Destiny. <tool_call>add_to_cart</tool_call>"
    ),
    "female_clothing": (
        "Here's an example. <reasoning>Preferences: I like a relaxed fit. Dealbreakers: it must "
        "be machine washable and under $60. Let me check each of the products step by step, "
        "first with dealbreakers then preferences. The Aria Jean is $75, which is over budget "
        "and disqualified. The Harbor Jean is $48 and machine washable, so it passes every "
        "dealbreaker; its relaxed fit also matches my preference, so it is acceptable."
        "</reasoning>The Harbor Jean works for me. <tool_call>add_to_cart</tool_call>"
    ),
    "male_clothing": (
        "Here's an example. <reasoning>Preferences: I want something breathable. Dealbreakers: "
        "under $50 and moisture-wicking. Let me check each of the products step by step, first "
        "with dealbreakers then preferences. The Crew Tee is $35 but 100% cotton, which is not "
        "moisture-wicking, so it fails a dealbreaker. The Trail Shirt is $42 and made of "
        "polyester, which wicks moisture; it passes the dealbreakers and its mesh panels make "
        "it breathable, so it is acceptable.</reasoning>I'll go with the Trail Shirt. "
        "<tool_call>add_to_cart</tool_call>"
    ),
    "rings": (
        "Here's an example. <reasoning>Preferences: I like yellow gold. Dealbreakers: it must "
        "be a complete ring, not a setting only, and under $1,200. Let me check each of the "
        "products step by step, first with dealbreakers then preferences. The Solene Ring is "
        "listed as setting only, which fails a dealbreaker. The Meadow Band is $950 and a "
        "complete ring, so it passes; it is also yellow gold, matching my preference, so it is "
        "acceptable.</reasoning>The Meadow Band is the one. <tool_call>add_to_cart</tool_call>"
    ),
    "cars": (
        "Here's an example. <reasoning>Preferences: I would like an SUV with good cargo room. "
        "Dealbreakers: it must stay under $30,000. Let me check each of the products step by "
        "step, first with dealbreakers then preferences. The Summit XL is $41,000, over budget "
        "and disqualified. The Vista Compact is $27,500, under budget, and it is an SUV with "
        "fold-flat seats, so it satisfies both the dealbreaker and my preference and is "
        "acceptable.</reasoning>Let's do the Vista Compact. <tool_call>add_to_cart</tool_call>"
    ),
    "games": (
        "Here's an example. <reasoning>Preferences: I enjoy cooperative play. Dealbreakers: it "
        "must be suitable for ages 8 and up and under $40. Let me check each of the products "
        "step by step, first with dealbreakers then preferences. Night Raid is rated 13+, "
        "which fails the age dealbreaker. Garden Quest is $29 and rated 8+, so it passes both "
        "dealbreakers, and it supports cooperative play, so it is acceptable.</reasoning>"
        "Garden Quest it is. <tool_call>add_to_cart</tool_call>"
    ),
}

DOMAIN_KNOWLEDGE = {
    "male_clothing": (
        "You may make a inference about a product being moisture wicking or not, breathable "
        "or not, and water-resistant or not based on the fabric. Polyester, nylon, spandex, "
        "and bamboo are often associated with moisture-wicking or quicker-drying performance. "
        "Cotton and denim are usually not moisture-wicking. Fabrics that contain cotton or "
        "bamboo are generally breathable, whereas fully synthetic fabrics may be less "
        "breathable. PU, faux leather, and nylon are generally water-resistant, while cotton "
        "and denim are not.\n"
        "For flexibility, products with relaxed style usually have more stretch and give.\n"
        "Do not infer water resistance, seamless construction, or reinforced stitching unless "
        "those are explicitly stated in product features. DO NOT hallucinate about a product "
        "being moisture-wicking."
    ),
    "female_clothing": (
        "You may reason about fabric properties from the stated composition. Cotton and "
        "bamboo blends are breathable and soft against skin; fully synthetic fabrics may be "
        "less breathable. Machine-washability must be stated explicitly; do not assume it. "
        "Relaxed and wide-leg cuts generally allow more movement than slim cuts."
    ),
    "rings": (
        "Metal purity is stated in karats; 18K contains more gold than 14K. A listing marked "
        "'setting only' does not include a center stone. Band width affects comfort: widths "
        "under 2 mm read as petite, widths above 4 mm as bold. Do not assume a ring is "
        "resizable unless stated."
    ),
    "smart_watch": (
        "GPS 'via smartphone' means the watch has no standalone GPS and needs a paired phone "
        "for track recording. Battery figures quoted as standby hours are much longer than "
        "active-use hours. Compatibility lists name the supported phone platforms; do not "
        "assume a watch works with both iOS and Android unless both are listed."
    ),
    "cars": (
        "Plug-in hybrids offer electric-only range plus a gasoline engine; regular hybrids do "
        "not charge from an outlet. Cargo volume is quoted in cubic feet with seats up unless "
        "stated otherwise. All-wheel drive aids traction but lowers fuel economy. Do not "
        "assume towing capability unless a rating is listed."
    ),
    "games": (
        "Age ratings are minimums: a 13+ game is unsuitable for younger players. Player "
        "counts state the supported range; cooperative modes are only present when listed. "
        "Digital-only editions cannot be resold or lent. Do not assume online multiplayer "
        "unless stated."
    ),
}

SALESBOT_TEMPLATE = """\
You are a digital salesperson for an online store, helping one shopper in the {category} department over chat.
- Use the lookup_product_items tool to search the inventory before recommending anything; only recommend products that appear in your tool results.
- Use the lookup_buying_guide tool when the shopper needs background knowledge about the product category.
- Present each recommendation by its exact product name with its price, and be honest when nothing in the inventory fits the shopper's requirements.
- You cannot sell anything yourself; the shopper decides whether to add a product to their cart or walk away.
"""

_PLACEHOLDER = re.compile(r"\{[a-z_]+\}")


def _persona_block(persona: Persona) -> str:
    return (
        f"{persona.name}, age {persona.age}. {persona.background}".strip()
        + f"\nBudget: {format_money(persona.budget)}."
    )


def _preferences_block(persona: Persona) -> str:
    return f"Preferences: {persona.preferences}\nDealbreakers: {persona.dealbreakers}"


def assemble_shopper_prompt(persona: Persona, category: str,
                            variant: str = "base") -> str:
    """Fill the shopper system prompt for one persona and category.

    Raises ConfigurationError when no templates exist for the category;
    guarantees no placeholder braces remain in the output.
    """
    if category not in RECOMMENDATION_EXAMPLES or category not in DOMAIN_KNOWLEDGE:
        raise ConfigurationError(f"no prompt templates for category {category!r}")
    if variant not in ("base", "human_steering"):
        raise ConfigurationError(f"unknown prompt variant {variant!r}")
    prompt = BASE_SHOPPER_TEMPLATE
    prompt = prompt.replace("{recommendation_example}", RECOMMENDATION_EXAMPLES[category])
    prompt = prompt.replace("{domain_knowledge}", DOMAIN_KNOWLEDGE[category])
    prompt = prompt.replace("{persona}", _persona_block(persona))
    prompt = prompt.replace("{preferences}", _preferences_block(persona))
    if variant == "human_steering":
        prompt += HUMAN_STEERING_ADDENDUM
    leftover = _PLACEHOLDER.search(prompt)
    if leftover:
        raise ConfigurationError(f"unfilled placeholder {leftover.group(0)!r}")
    return prompt


def assemble_salesbot_prompt(category: str) -> str:
    return SALESBOT_TEMPLATE.replace("{category}", category_label(category))
