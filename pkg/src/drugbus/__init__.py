"""Federated drug-availability lookup.

Independent pharmacy providers expose a small XML lookup contract over HTTP;
a central service bus discovers them through a registry, fans consumer
queries out concurrently, normalizes the replies, and returns hits ranked by
closeness to the search point. A consumer gateway, CLI, and web UI sit on
top.
"""

__version__ = "0.1.0"
