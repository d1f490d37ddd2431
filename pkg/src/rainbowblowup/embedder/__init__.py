"""Blow-up instances and the rainbow embedding pipeline."""
from .colours import (LiftedColouring, Reservation, active_labels, lift_exceptional_colouring,
                      merge_rare_colours, merge_summary, reserve_colours)
from .instance import (BlowUpInstance, check_feasible, complete_candidacy, exc3_loads, image_colours,
                       instance_from_json, instance_to_json, load_instance, validate_instance,
                       verify_embedding)
from .reduction import Reduction, rainbow_blowup_embed, reduce_to_matchings
from .rounds import (EmbeddingState, EmbedParams, EmbedResult, embed_rounds, eps_ladder, forced_colour_sets,
                     prune_forced, reserve_for, resolve_reservation, round_conflict_system,
                     update_candidacy)
