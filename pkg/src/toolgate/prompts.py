"""Prompt templates used by the gateway, the agent, and the judge.

Templates are plain ``str.format`` strings. ``PROMPT_VERSION`` is recorded
next to any artifact generated from them so regeneration can be detected.
"""

PROMPT_VERSION = 1

AGENT_SYSTEM_PROMPT = """\
You are an agent designed to assist users with daily tasks by using external tools. \
You have access to two tools: a retrieval tool and an execution tool. The retrieval \
tool allows you to search a large toolset for relevant tools, and the execution tool \
lets you invoke the tools you retrieved. Whenever possible, you should use these tools \
to get accurate, up-to-date information and to perform file operations.

Note that you can only response to user once, so you should try to provide a complete \
answer in your response."""

ROUTE_TOOL_DESCRIPTION = """\
This is a tool used to find MCP servers and tools that can solve user needs

When to use this tool:

    - When faced with user needs, you (LLM) are unable to solve them on your own and do not have the tools to solve the problem.

    - When a user proposes a new task and you (LLM) are unsure which specific tool to use to complete it.

    - When the user's request is vague or complex, and feasible tool options need to be explored first.

    - This is the first step in executing unknown tasks, known as the "discovery" phase, aimed at finding the correct tool.

**Parameter Description**

Query (string, required): The input query must contain a <tool_assistant> tag with server and tool descriptions, for example:

<tool_assistant>
server: ... # Platform/permission domain
tool: ... # Operation type + target
</tool_assistant>"""

EXECUTE_TOOL_DESCRIPTION = """\
A tool for executing a specific tool on a specific server. Select tools only from the results obtained from the previous route each time.

When to use this tool:

    - When using the route tool to route to a specific MCP server and tool

    - When the 'execute-tool' fails to execute (up to 3 repetitions).

    - When the user's needs and previous needs require the same tool.

Parameters explained:

    - server_name: string, required. The name of the server where the target tool is located.

    - tool_name: string, required. The name of the target tool to be executed.

    - params: dictionary or None, optional. A dictionary containing all parameters that need to be passed to the target tool. This can be omitted if the target tool does not require parameters."""

SERVER_SUMMARY_PROMPT = """\
You are an expert AI technical writer. Based on the following information about an MCP server, please generate a concise and accurate summary of its core purpose and capabilities.

**Server Name:** {server_name}

**Server Description:** {server_desc}

**Available Tools:** {tool_descriptions}

Please return only the generated summary text, without any additional titles or preambles."""

EVALUATION_PROMPT = """\
You are an expert in evaluating the performance of a tool-use agent. The agent is designed to help a human user use multi-tools to complete a task. Given the user's task, the agent's final response, key points for task completion, and tool call history, your goal is to determine whether the agent has completed the task and achieved all requirements.

Your response must strictly follow the following evaluation criteria!

*Important Evaluation Criteria*:

1. You must carefully check whether the information (e.g. the coordinates of the addresses) comes from the tool call, if the agent get it from the internal knowledge, it should be considered failed.

2: Some tasks require to create files to be considered successful.

*IMPORTANT*

Format your response into two lines as shown below:

Thoughts: <your thoughts and reasoning process based on double-checking each key points and the evaluation criteria>

Status: "success" or "failure"

User Task: {task}

Key Points: {key_points}

Final Response: {response}

Tool Call History: {tool_calls}

Tool Descriptions: {tool_descriptions}"""

KEY_POINTS_PROMPT = """\
You are an expert tasked with analyzing a given task to identify the key points explicitly stated in the task description.

**Objective**: Carefully analyze the task description and extract the critical elements explicitly mentioned in the task for achieving its goal.

**Instructions**:

1. Read the task description carefully.

2. Identify and extract **key points** directly stated in the task description.

   - A **key point** is a critical element, condition, or step explicitly mentioned in the task description.

   - Do not infer or add any unstated elements.

**Respond with**:

- **Key Points**: A numbered list of the explicit key points for completing this task, one per line, without explanations or additional details.

{task}"""
