"""Protocol session: hello, then lockstep request/response on text streams."""
from __future__ import annotations

import sys

from .protocol import (
    ProtocolError,
    context_response,
    decode,
    encode,
    error_message,
    hello_message,
)
from .tasks import Task, load_tasks, vocabulary


def serve(backbone, tasks: list[Task], stdin=None, stdout=None) -> int:
    """Run one session over the given streams until the input closes.

    Generation failures are reported as error messages for the offending task;
    the session keeps serving. Returns the number of contexts served.
    """
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    by_id = {task.task_id: task for task in tasks}
    actions = vocabulary(tasks)
    embeddings = {a: backbone.action_embedding(a) for a in actions}

    stdout.write(encode(hello_message(backbone.dimension, actions, embeddings)))
    stdout.flush()

    served = 0
    for line in stdin:
        if not line.strip():
            continue
        try:
            message = decode(line)
        except ProtocolError as exc:
            stdout.write(encode(error_message(None, str(exc))))
            stdout.flush()
            continue
        mtype = message["type"]
        task_id = str(message.get("task_id", ""))
        if mtype == "context_request":
            task = by_id.get(task_id)
            if task is None:
                stdout.write(encode(error_message(task_id, f"unknown task {task_id!r}")))
                stdout.flush()
                continue
            step = int(message.get("step", 0))
            try:
                vector, thought = backbone.next_context(task, step)
            except Exception as exc:  # noqa: BLE001 - per-task fault barrier
                stdout.write(encode(error_message(task_id, f"generation failed: {exc}")))
                stdout.flush()
                continue
            stdout.write(encode(context_response(task_id, step, vector, thought)))
            stdout.flush()
            served += 1
        elif mtype == "action_taken":
            task = by_id.get(task_id)
            if task is not None:
                backbone.record_action(
                    task,
                    int(message.get("step", 0)),
                    str(message.get("action", "")),
                    str(message.get("observation_text", "")),
                )
        elif mtype == "end_episode":
            task = by_id.get(task_id)
            if task is not None:
                backbone.end_task(task)
        else:
            stdout.write(
                encode(error_message(task_id, f"unexpected client message {mtype!r}"))
            )
            stdout.flush()
    return served


def serve_path(backbone, tasks_path, stdin=None, stdout=None) -> int:
    return serve(backbone, load_tasks(tasks_path), stdin=stdin, stdout=stdout)
