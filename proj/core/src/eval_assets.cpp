#include <array>

#include "rolesteer/evalharness.hpp"

namespace rolesteer {

namespace {

const RolePromptSet kArithmeticRoles{
    ReasoningDomain::arithmetic,
    {
        "As a highly qualified mathematics teacher, you excel at solving problems systematically and explaining "
        "solutions with clarity. I am your student, eager to learn. Please solve the following problem:",
        "As an excellent mathematics teacher, you always guide your students correctly through math problems. I am "
        "one of your students, eager to learn. Please answer the following question:",
        "As a respected mathematics professor with deep expertise in solving complex problems, you are known for "
        "your clarity and precision. I am your student and need help. Please solve the following question for me:",
        "As a world-renowned mathematics teacher, you are highly skilled at solving problems precisely and "
        "explaining them effectively. I am your student, struggling with a question. Please solve the following "
        "task for me:",
        "As a mathematics expert with strong problem-solving skills, you are deeply trusted by your students. I am "
        "one of them and need your help. Please solve the following problem for me:",
    },
    "",
};

const RolePromptSet kCommonsenseRoles{
    ReasoningDomain::commonsense,
    {
        "You are now a contestant in a general knowledge quiz and are always able to answer all kinds of common "
        "sense questions accurately. I am the host of the contest, and the final round is about to begin. Let’s "
        "kick things off with your first question:",
        "Please take on the role of a contestant in a general knowledge competition, capable of answering all types "
        "of common sense questions correctly. The contest has reached the final stage, and I am the moderator. Here "
        "comes your first challenge:",
        "From this point on, you will appear as a participant in a general knowledge quiz, and you must respond "
        "accurately to every common sense question. I am the host of this final round, and the contest is about to "
        "start. Let’s begin with the first question:",
        "Imagine that you are now a contestant in a general knowledge competition, able to correctly answer any "
        "question involving common sense. The final is about to begin, and I will be hosting the match. Now, "
        "let’s see how you do with the first question:",
        "You will take on the role of a contestant in a general knowledge quiz, equipped with the ability to answer "
        "all types of common sense questions precisely. As the host, I announce that the final round is about to "
        "commence. Let’s start the game with the first question:",
    },
    "",
};

constexpr std::array<Exemplar, 1> kArithmeticOneShot = {{
    {"Michael had 58 golf balls. On Tuesday, he lost 23 golf balls. On Wednesday, he lost 2 more. How many golf "
     "balls did he have at the end of Wednesday?",
     "Let's think step by step. Michael started with 58 golf balls. After losing 23 on Tuesday, he had 58 - 23 = "
     "35. After losing 2 more, he had 35 - 2 = 33.",
     "33"},
}};

constexpr std::array<Exemplar, 4> kArithmeticFewShot = {{
    {"Jason had 20 lollipops. He gave Denny some lollipops. Now Jason has 12 lollipops. How many lollipops did "
     "Jason give to Denny?",
     "Let's think step by step. Jason started with 20 lollipops. Then he had 12 after giving some to Denny. So he "
     "gave Denny 20 - 12 = 8.",
     "8"},
    {"Leah had 32 chocolates and her sister had 42. If they ate 35, how many pieces do they have left in total?",
     "Let's think step by step. Originally, Leah had 32 chocolates. Her sister had 42. So in total they had 32 + "
     "42 = 74. After eating 35, they had 74 - 35 = 39.",
     "39"},
    {"There were nine computers in the server room. Five more computers were installed each day, from Monday to "
     "Thursday. How many computers are now in the server room?",
     "Let's think step by step. There were originally 9 computers. For each of 4 days, 5 more computers were "
     "added. So 5 * 4 = 20 computers were added. 9 + 20 = 29.",
     "29"},
    {"Olivia has $23. She bought five bagels for $3 each. How much money does she have left?",
     "Let's think step by step. Olivia had 23 dollars. 5 bagels for 3 dollars each will be 5 x 3 = 15 dollars. So "
     "she has 23 - 15 dollars left. 23 - 15 = 8.",
     "8"},
}};

constexpr std::array<Exemplar, 1> kCommonsenseOneShot = {{
    {"What home entertainment equipment requires cable? Answer Choices: (a) radio shack (b) substation (c) "
     "television (d) cabinet",
     "Let's think step by step. The answer must require cable. Of the above choices, only television requires "
     "cable.",
     "(c)"},
}};

constexpr std::array<Exemplar, 4> kCommonsenseFewShot = {{
    {"Where do you put your grapes just before checking out? Answer Choices: (a) mouth (b) grocery cart (c)super "
     "market (d) fruit basket (e) fruit market",
     "Let's think step by step. The answer should be the place where grocery items are placed before checking "
     "out. Of the above choices, grocery cart makes the most sense for holding grocery items.",
     "(b)"},
    {"Google Maps and other highway and street GPS services have replaced what? Answer Choices: (a) united states "
     "(b) mexico (c) countryside (d) atlas",
     "Let's think step by step. The answer must be something that used to do what Google Maps and GPS services "
     "do, which is to give directions. Of the above choices, only atlases are used to give directions.",
     "(d)"},
    {"Before getting a divorce, what did the wife feel who was doing all the work? Answer Choices: (a) harder (b) "
     "anguish (c) bitterness (d) tears (e) sadness",
     "Let's think step by step. The answer should be the feeling of someone getting divorced who was doing all "
     "the work. Of the above choices, the closest feeling is bitterness.",
     "(c)"},
    {"What home entertainment equipment requires cable? Answer Choices: (a) radio shack (b) substation (c) "
     "television (d) cabinet",
     "Let's think step by step. The answer must require cable. Of the above choices, only television requires "
     "cable.",
     "(c)"},
}};

}  // namespace

const RolePromptSet& role_prompts(ReasoningDomain domain) {
    return domain == ReasoningDomain::arithmetic ? kArithmeticRoles : kCommonsenseRoles;
}

std::span<const Exemplar> one_shot_exemplars(ReasoningDomain domain) {
    if (domain == ReasoningDomain::arithmetic) return kArithmeticOneShot;
    return kCommonsenseOneShot;
}

std::span<const Exemplar> few_shot_exemplars(ReasoningDomain domain) {
    if (domain == ReasoningDomain::arithmetic) return kArithmeticFewShot;
    return kCommonsenseFewShot;
}

}  // namespace rolesteer
