"""Hand-object interaction fields, contact maps, and field metrics."""

from .field import (
    ContactMap,
    InteractionField,
    SpatialIndex,
    brute_force_field,
    contact_map,
    field_acc,
    field_ade,
    interaction_field,
)

__all__ = [
    "ContactMap",
    "InteractionField",
    "SpatialIndex",
    "brute_force_field",
    "contact_map",
    "field_acc",
    "field_ade",
    "interaction_field",
]
