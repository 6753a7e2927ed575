"""
Graphviz rendering of session coalgebras.
"""

from typing import Iterable, Optional, Set
import sys
from pathlib import Path

from graphviz import Digraph

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from sessions.coalgebra import SessionCoalgebra, generated_subcoalgebra

DATA_EDGE_STYLE = {"color": "blue", "style": "dashed"}


def to_dot(c: SessionCoalgebra, roots: Optional[Iterable[str]] = None) -> str:
    """
    Render a coalgebra as DOT text.

    Args:
        c: Coalgebra to render
        roots: Render only the states generated by these roots (default all)

    Returns:
        DOT source of a digraph
    """
    if roots is None:
        visible: Set[str] = set(c.states)
    else:
        visible = set()
        for root in roots:
            visible |= generated_subcoalgebra(c, root)

    dot = Digraph(name="session")
    dot.attr(rankdir="LR")
    dot.attr("node", shape="circle")
    for state_id in sorted(visible):
        label = c.states[state_id].label
        dot.node(state_id, label=f"{state_id}\n{label.symbol}")

    for state_id in sorted(visible):
        for key, target in c.states[state_id].sorted_transitions():
            if key.is_data:
                dot.edge(state_id, target, **DATA_EDGE_STYLE)
            elif key.label is not None:
                dot.edge(state_id, target, label=key.label)
            else:
                dot.edge(state_id, target)
    return dot.source
