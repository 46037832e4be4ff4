import json
import logging
import math
from pathlib import Path

from .model import Network, NetworkKind, NetworkValidationError

logger = logging.getLogger(__name__)


class NetworkFormatError(NetworkValidationError):
    """Raised for network files that cannot be parsed into a valid network."""


def _theta_from_edge(edge: dict, kind: NetworkKind) -> float:
    has_theta, has_q = "theta" in edge, "q" in edge
    if has_theta == has_q:
        raise NetworkFormatError(
            f"Edge {edge.get('parent')}->{edge.get('child')} must give exactly one of 'theta' or 'q'"
        )
    if has_theta:
        return float(edge["theta"])
    q = float(edge["q"])
    if kind is not NetworkKind.NOISY_OR:
        raise NetworkFormatError("'q' edge parameters are only meaningful for noisy_or networks")
    if not 0.0 <= q < 1.0:
        raise NetworkFormatError(
            f"Edge {edge['parent']}->{edge['child']} has q={q}; noisy-OR links need 0 <= q < 1"
        )
    return -math.log1p(-q)


def network_from_dict(doc: dict) -> Network:
    """
    Build a network from the JSON document schema
    (kind, n, optional layers, priors, edges).
    """
    try:
        kind = NetworkKind.parse(doc["kind"])
        n = doc["n"]
        if not isinstance(n, int) or isinstance(n, bool):
            raise NetworkFormatError(f"'n' must be an integer, got {n!r}")
        edges = []
        for edge in doc.get("edges", []):
            edges.append((int(edge["child"]), int(edge["parent"]), _theta_from_edge(edge, kind)))
        priors = {}
        for entry in doc.get("priors", []):
            node = int(entry["node"])
            if node in priors:
                raise NetworkFormatError(f"Node {node} has more than one prior entry")
            priors[node] = float(entry["p"])
        layers = None
        if doc.get("layers") is not None:
            layers = (doc["layers"]["l1"], doc["layers"]["l2"])
    except NetworkFormatError:
        raise
    except NetworkValidationError as e:
        raise NetworkFormatError(str(e)) from e
    except (KeyError, TypeError, ValueError) as e:
        raise NetworkFormatError(f"Malformed network document: {e!r}") from e
    try:
        return Network(kind, n, edges, priors, layers)
    except NetworkValidationError as e:
        raise NetworkFormatError(str(e)) from e


def network_to_dict(net: Network) -> dict:
    doc = {"kind": net.kind.value, "n": net.n}
    if net.is_bipartite:
        doc["layers"] = {"l1": list(net.l1), "l2": list(net.l2)}
    doc["priors"] = [{"node": node, "p": p} for node, p in net.root_priors.items()]
    doc["edges"] = [
        {"child": child, "parent": parent, "theta": theta} for child, parent, theta in net.edges()
    ]
    return doc


def load_network(path) -> Network:
    path = Path(path)
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise NetworkFormatError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(doc, dict):
        raise NetworkFormatError(f"{path}: top-level JSON value must be an object")
    net = network_from_dict(doc)
    logger.debug("Loaded %r from %s", net, path)
    return net


def format_real(x: float) -> str:
    """17 significant digits in exponent form, a valid JSON number."""
    return f"{x:.16e}"


def dumps_network(net: Network) -> str:
    doc = network_to_dict(net)
    lines = ["{", f' "kind": {json.dumps(doc["kind"])},', f' "n": {doc["n"]},']
    if "layers" in doc:
        lines.append(f' "layers": {json.dumps(doc["layers"])},')
    priors = [f'  {{"node": {e["node"]}, "p": {format_real(e["p"])}}}' for e in doc["priors"]]
    lines.append(' "priors": [')
    lines.append(",\n".join(priors))
    lines.append(" ],")
    edges = [
        f'  {{"child": {e["child"]}, "parent": {e["parent"]}, "theta": {format_real(e["theta"])}}}'
        for e in doc["edges"]
    ]
    lines.append(' "edges": [')
    if edges:
        lines.append(",\n".join(edges))
    lines.append(" ]")
    lines.append("}")
    return "\n".join(lines) + "\n"


def save_network(net: Network, path):
    path = Path(path)
    with open(path, "w") as f:
        f.write(dumps_network(net))
    logger.debug("Saved %r to %s", net, path)
