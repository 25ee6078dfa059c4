"""Prompt templates and renderers for the provider-backed agents.

The instruction blocks are the agents' operating contracts and are kept
byte-stable (including their historical typos): identical inputs must
yield identical provider requests.
"""

from __future__ import annotations

from .actions import Action
from .harness import HintText

ACTION_SYSTEM_INSTRUCTION = """You are in a Room Escape game. You should explore the scene and find out what to do next.
There are three types of interactives: items, which are the interactable things in the scene; tools, which are applicable tools in your bag; scenes, whcih are interactable scenes near your current position.

You can perform one of the following actions:
- click(<interactable item>): Click an <interactable item> to examine it or interact with it. For example, you can examine a door handle that is marked as interactable.
- apply(<applicable tool>, <interactable item>): Apply an <applicable tool> in your bag to an <interactable item>. For example, you can apply a key in your bag to an interactable locked door to open it.
- input(string, <interactable item>): Input a string (only digits and letters) to an <interactable item>. For example, you can input a string password to an interactable combination lock.
- move(<interactable scene>): Move to a nearby <interactable item> to further explore. For example, you can move to the living room to explore more interactable items there.
- craft(<applicable tool>, <applicable tool>): Use one <applicable tool> in bag to another <applicable tool> in bag to craft something new. For example, you can use a battery in bag to a controller in bag to craft a new charged controller.
For instance, some valid actions may be: click(microwave), apply(key, silver chest), craft(controller, battery), input(c79a1, combination lock), move(Go to operation room)."""

REFLECTION_SYSTEM_INSTRUCTION = """You are a helpful agent to reflect on your action and environment response, and then maintain a task list with solving suggestions.
The role of this task list is that there are some tasks you currently cannot solve with the tools at hand, but you think you may need to solve them later, so write them down with some suggestions and hints for your future reference.

After analyzing your current action and the response from the environment, you should give an action to maintain the task list: update ,new, delete or none.
- update(updated_feedback): The parameter should an updated feedback about what you newly tried but failed. The updated feedback should retain the original feedback, and add one new hindsight you got from current action.
- new(task_name, feedback): The first parameter should be a brief name of the new task you propose, the second parameter should be what you have to do (extract hint from environment response) to solve this task.
- delete(index): If you choose delete, then the first parameter should be the index of the task in the task list that you thought you have completed or is not useful anymore.
- none(): If you choose none, do not give any parameter, it indicates you believe you don't need to perform any action on the task list in the current step
For instance, valid task list maintaining action may be: update(The door has a keyhole and needs a key. I try apply a hammer but fails.), new(open the safe, I need a 4-digit password input to open it with a hint of sigma sign beside the safe.), delete(1), none()."""

FORESIGHT_NEW_TOOL_INSTRUCTION = """You are in a Room Escape game. You have to use your creativity to figure out the use of the tool you have just collected.
There are generally two ways about how to use the tool:
1. Combine this tool with another one in your bag to craft a new tool. In this case, use acton 'craft(<collected tool>, <applicable tool>)', e.g. craft(controller, battery) indicates use a battery in your bag you already have to the controller you just collected to craft a charged controller.
2. Apply this tool to a target item in a task to try solve this task. In this case, use action 'apply(<collected tool>, Target Item in a task)', e.g. apply(key, locked cabinet) indicates apply the key you just collected to a locked cabinet to open it.

Here are some general hints that you may follow:
1. Please especially pay attention to the description of the task and the tool, try to find the connection between them to justify your action.
2. In your '- Thought: ...' part in response, you shuold explicitly think about whether there's item in bag for crafting, or task in the list for applying this tool. You should read and infer carefully from the tool descriptions and the task description, and evaluate one by one.
3. In your '- Actions: ...' part in response, you should give zero to multiple action calls. For each action, you should follow the format 'craft(<collected tool>, <applicable tool>)' or 'apply(<collected tool>, Target Item in a task)'. If it's a craft action, you should justify why crafting here makes sense. If it's an apply action, you should first give the task index corresponding to the target item, then justify why this tool may solve the task."""

FORESIGHT_NEW_TASK_INSTRUCTION = """You are in a Room Escape game. You have to use your creativity to figure out if you could use any tools you have now to solve a new task you have just discovered.
There are generally three ways to solve a task:
1. Click the target item to simply interact with it to solve the task. In this case, use action 'click(Target Item in current task)', e.g. click(microwave) indicates click the microwave to examine it and try solve the task.
2. Use the tool in your bag to apply to the target item in the task. In this case, use action 'apply(<applicable tool>, Target Item in current task)', e.g. apply(key, locked cabinet) indicates apply the key in your bag to a locked cabinet to open it.
3. Input a string to the target item in the task. In this case, use action 'input(<any string>, Target Item in current task)', e.g. input(2413, combination lock) indicates input a string password to the combination lock to solve the task.

Here are some general hints that you may follow:
1. Please especially pay attention to the description of the task about what might be needed. Please always first try simple click to interact if haven't done so. Examine the tool description and your memory pad, try to find the connection between them and what this task needs to justify your action.
2. In your '- Thought: ...' part in response, you should explicitly think about whether there's item to click, tool in bag for applying, or hint from memory pad and tools for string input. You should read and infer carefully from the task description, evaluate one by one.
3. In your '- Actions: ...' part in response, you should give zero to multiple action calls. For each action, you should follow the format 'click(Target Item in current task)', 'apply(<applicable tool>, Target Item in current task)', or 'input(<any string>, Target Item in current task)'. You shuold justify why this action may solve the task according to the task description, tool description, and memory pad hint."""

ANSWER_FORMAT_REMINDER = (
    "First reason step by step after '- Thought: ', then give exactly one "
    "action call after '- Action: '."
)

RETRY_REMINDER = (
    "Your last reply could not be parsed: {error}. Reply again with exactly "
    "one well-formed action call, e.g. click(door handle)."
)

# Memory entries render into the prompt exactly as recorded.
MEMORY_ENTRY_TEMPLATE = """History: [Step {index}]
Your position: {position}
Your action: {action}
Response from the environment: {response}"""

TASK_ENTRY_TEMPLATE = """[Task Index {index}] Name: {name}, Target Item: {target}
- Task description: {description}"""

# Positions render as the route taken, most recent hops last.
_POSITION_HOPS_SHOWN = 5


def render_position(path: tuple[str, ...]) -> str:
    hops = list(path[-_POSITION_HOPS_SHOWN:])
    prefix = "... -> " if len(path) > _POSITION_HOPS_SHOWN else ""
    return prefix + " -> ".join(hops)


def render_memory(entries) -> str:
    if not entries:
        return "History: (empty, this is your first step)"
    return "\n\n".join(
        MEMORY_ENTRY_TEMPLATE.format(
            index=entry.index,
            position=entry.position,
            action=entry.action,
            response=entry.response,
        )
        for entry in entries
    )


def render_task_list(tasks) -> str:
    if not tasks:
        return "Task list: (empty)"
    return "\n".join(
        TASK_ENTRY_TEMPLATE.format(
            index=task.index, name=task.name, target=task.target_item, description=task.description
        )
        for task in tasks
    )


def render_action_user_prompt(
    memory_text: str,
    observation_text: str,
    hint: HintText | None,
    task_list_text: str | None = None,
    retry_error: str | None = None,
) -> str:
    blocks = [memory_text, observation_text]
    if task_list_text is not None:
        blocks.append(task_list_text)
    if hint is not None:
        blocks.append(hint.text)
    if retry_error:
        blocks.append(RETRY_REMINDER.format(error=retry_error))
    blocks.append(ANSWER_FORMAT_REMINDER)
    return "\n\n".join(blocks)


def render_reflection_user_prompt(
    task_list_text: str, action: Action, response: str
) -> str:
    return "\n\n".join(
        [
            "Here is your current task list:",
            task_list_text,
            f"Your action: {action.render()}",
            f"Response from the environment: {response}",
            "Give exactly one task list maintaining action.",
        ]
    )


def render_new_tool_user_prompt(tool_name: str, tool_desc: str, task_list_text: str, bag_text: str) -> str:
    return "\n\n".join(
        [
            f"You have just collected the tool: {tool_name}: {tool_desc}",
            "Here is your current task list:",
            task_list_text,
            "Here are the tools in your bag:",
            bag_text,
        ]
    )


def render_new_task_user_prompt(task_text: str, bag_text: str, memory_text: str) -> str:
    return "\n\n".join(
        [
            "You have just discovered a new task:",
            task_text,
            "Here are the tools in your bag:",
            bag_text,
            "Here is your memory pad of recent steps:",
            memory_text,
        ]
    )
