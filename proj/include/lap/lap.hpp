#pragma once

#include "lap/actions.hpp"
#include "lap/benchmark.hpp"
#include "lap/config.hpp"
#include "lap/contact.hpp"
#include "lap/error.hpp"
#include "lap/external_policy.hpp"
#include "lap/geo_film.hpp"
#include "lap/geometry.hpp"
#include "lap/io.hpp"
#include "lap/metrics.hpp"
#include "lap/perturb.hpp"
#include "lap/prompts.hpp"
#include "lap/refine.hpp"
#include "lap/scene.hpp"
#include "lap/server.hpp"
#include "lap/session.hpp"
#include "lap/synthetic.hpp"
