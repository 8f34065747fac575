"""Prompt templates for role generation, role updates, and memory updates.

Each template starts with a fixed header line so that deterministic test
providers can tell the call types apart without any out-of-band signal.
"""

from __future__ import annotations

MEMORY_UPDATE_HEADER = (
    "You are an agent in a school simulation. Process recent events to update "
    "your four memory components: long-term experience, short-term experience, "
    "long-term knowledge, and short-term knowledge."
)

MEMORY_UPDATE_TEMPLATE = (
    MEMORY_UPDATE_HEADER
    + """

Current Situation:
{situation}

Recent Experience:
{recent}

Steps:
1. Identify the key events, interactions, and observations in the recent experience.
2. Compare them with the current situation and your retrieved memories.
3. Extract new facts, insights, and event details worth keeping.
4. Formulate additions for your long-term experience memory.
5. Formulate additions for your long-term knowledge memory.
6. Select the most salient items for quick short-term access.
7. Formulate the experience content for short-term memory.
8. Formulate the knowledge content for short-term memory.

Output the results as a JSON object with the following structure:
{{
  "long_term_experience_updates": [string],
  "long_term_knowledge_updates": [string],
  "short_term_experience_content": [string],
  "short_term_knowledge_content": [string]
}}"""
)

ROLE_UPDATE_HEADER = (
    "You are an agent reflecting on your recent experiences and learning. "
    "Update your current role setting within the school simulation."
)

# Substring that signals no role change; matched case-insensitively.
ROLE_UNCHANGED_MARKER = "remains largely unchanged"

ROLE_UPDATE_TEMPLATE = (
    ROLE_UPDATE_HEADER
    + """

Current Role Setting:
{role_text}

Reflection Insights Summary:
{summary}

Based on your current role setting and the reflection insights, identify which
aspects of your profile should be updated. Consider areas like:
- Personality traits (e.g., becoming more patient, less easily distracted)
- Behavioral tendencies (e.g., more likely to ask questions or collaborate)
- Strategies (e.g., adjusting teaching methods, changing study habits)
- Beliefs or understandings related to your role and the simulation
- Specific quirks or habits

Describe the proposed updates to your role setting. If no significant updates
are needed, state that the role setting remains largely unchanged."""
)

ROLE_GENERATION_HEADER = (
    "You are a creative writer creating a detailed profile for an agent in an "
    "educational simulation. Create a unique and realistic profile for the "
    "specified role."
)

ROLE_GENERATION_TEACHER = (
    ROLE_GENERATION_HEADER
    + """

Generate a profile for a middle school {subject} teacher. Include:
- Full Name
- Gender
- Age
- Years of Teaching Experience
- Teaching Philosophy/Style (e.g., strict, supportive, innovative, traditional)
- Personality Traits (e.g., patient, enthusiastic, strict, humorous, introverted, extroverted)
- Strengths as a Teacher
- Weaknesses as a Teacher
- Interests or Hobbies Outside of Teaching
- Specific Quirks or Habits

Keep the profile internally consistent, with enough detail to drive realistic
behavior in a school simulation."""
)

ROLE_GENERATION_STUDENT = (
    ROLE_GENERATION_HEADER
    + """

Generate a profile for a middle school student. Include:
- Full Name
- Academic Performance (e.g., excellent, average, struggling)
- Learning Style (e.g., visual, auditory, kinesthetic, independent, collaborative)
- Personality Traits (e.g., shy, outgoing, curious, diligent, easily distracted)
- Brief Background Story (e.g., family background, motivation for learning)
- Academic Strengths
- Academic Weaknesses
- Interests or Hobbies Outside of School
- Social Tendencies (e.g., popular, quiet, leader, follower)
- Specific Quirks or Habits

Keep the profile internally consistent, with enough detail to drive realistic
behavior in a school simulation."""
)
