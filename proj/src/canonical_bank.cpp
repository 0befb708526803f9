// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/templates.hpp"

namespace mpvqa {

namespace {

constexpr std::string_view kBank = R"BANK(# Canonical multi-task templates, one per nonempty subset of the four tasks.
@kind multitask
@tasks volume
Q: How large is the volume covered by {label}?
A: The overall volume of {label} is {volume}.
@tasks region
Q: Which region(s) of the brain is {label} located in?
A: The {label} is located in {regions}.
@tasks shape
Q: What is the shape of {label}?
A: The shape of {label} is {shape}.
@tasks spread
Q: How spread out is {label}?
A: The spread of {label} is {spread}.
@tasks volume,region
Q: How large is the volume of {label} and where is it located?
A: The overall volume of {label} is {volume}, and it is located in {regions}.
@tasks volume,shape
Q: How large is the volume of {label} and what is its shape?
A: The overall volume of {label} is {volume}, and its shape is described as {shape}.
@tasks volume,spread
Q: How large is the volume of {label} and how spread out is it?
A: The overall volume of {label} is {volume}, and it is characterized as {spread}.
@tasks region,shape
Q: In which region is {label} and what is its shape?
A: The {label} is located in {regions}, and its shape is described as {shape}.
@tasks region,spread
Q: In which region is {label} and how spread out is it?
A: The {label} is located in {regions}, and it is characterized as {spread}.
@tasks shape,spread
Q: What is the shape of {label} and how spread out is it?
A: The shape of {label} is described as {shape}, and it is characterized as {spread}.
@tasks volume,region,shape
Q: What is the volume, region, and shape of {label}?
A: The overall volume of {label} is {volume}, it is located in {regions}, and its shape is described as {shape}.
@tasks volume,region,spread
Q: What is the volume, region, and spread of {label}?
A: The overall volume of {label} is {volume}, it is located in {regions}, and it is characterized as {spread}.
@tasks volume,shape,spread
Q: What is the volume, shape, and spread of {label}?
A: The overall volume of {label} is {volume}, its shape is described as {shape}, and it is characterized as {spread}.
@tasks region,shape,spread
Q: What is the region, shape, and spread of {label}?
A: The {label} is located in {regions}, its shape is described as {shape}, and it is characterized as {spread}.
@tasks volume,region,shape,spread
Q: What is the volume, region, shape, and spread of {label}?
A: The overall volume of {label} is {volume}, it is located in {regions}, its shape is described as {shape}, and it is characterized as {spread}.

# Partially out-of-scope: the answerable tasks plus one request the model declines.
@kind partial_oos
@tasks volume
Q: How large is {label}, and what grade would you assign to this tumor?
A: The overall volume of {label} is {volume}. Assigning a tumor grade is beyond what I can determine from this scan.
@tasks region
Q: Where is {label} located, and which surgical approach would you recommend?
A: The {label} is located in {regions}. Recommending a surgical approach is outside my domain.
@tasks shape
Q: Describe the shape of {label} and estimate the patient's survival.
A: The shape of {label} is {shape}. I cannot estimate survival.
@tasks spread
Q: How spread out is {label}, and is the IDH mutation present?
A: The spread of {label} is {spread}. Mutation status cannot be determined from the images available to me.
@tasks volume,region
Q: What is the volume of {label}, where is it, and has it grown since the prior exam?
A: The overall volume of {label} is {volume}, and it is located in {regions}. I have no prior exam to compare against.
@tasks volume,shape
Q: What are the volume and shape of {label}, and should the patient start chemotherapy?
A: The overall volume of {label} is {volume}, and its shape is described as {shape}. Treatment decisions are outside my domain.
@tasks volume,spread
Q: Give the volume of {label}, how spread out it is, and the likely histology.
A: The overall volume of {label} is {volume}, and it is characterized as {spread}. I cannot infer histology.
@tasks region,shape
Q: Which regions contain {label}, what is its shape, and what symptoms will the patient have?
A: The {label} is located in {regions}, and its shape is described as {shape}. Predicting symptoms is beyond my capabilities.
@tasks region,spread
Q: Where is {label} and how spread out is it, and what dose of radiation is appropriate?
A: The {label} is located in {regions}, and it is characterized as {spread}. Radiation dosing is not something I can advise on.
@tasks shape,spread
Q: What is the shape of {label}, how spread out is it, and what is the MGMT methylation status?
A: The shape of {label} is described as {shape}, and it is characterized as {spread}. Methylation status is outside what I can assess.
@tasks volume,region,shape
Q: Summarize the volume, location, and shape of {label}, then draft a referral letter.
A: The overall volume of {label} is {volume}, it is located in {regions}, and its shape is described as {shape}. Drafting a referral letter is outside my domain.
@tasks volume,region,spread
Q: Report the volume, region, and spread of {label}, and compare it with the patient's family history.
A: The overall volume of {label} is {volume}, it is located in {regions}, and it is characterized as {spread}. I have no access to family history.
@tasks volume,shape,spread
Q: What are the volume, shape, and spread of {label}, and how will it respond to immunotherapy?
A: The overall volume of {label} is {volume}, its shape is described as {shape}, and it is characterized as {spread}. I cannot predict treatment response.
@tasks region,shape,spread
Q: Where is {label}, what is its shape and spread, and what is the expected recurrence time?
A: The {label} is located in {regions}, its shape is described as {shape}, and it is characterized as {spread}. Estimating recurrence time is beyond my capabilities.
@tasks volume,region,shape,spread
Q: Describe the volume, region, shape, and spread of {label}, and synthesize a full care plan.
A: The overall volume of {label} is {volume}, it is located in {regions}, its shape is described as {shape}, and it is characterized as {spread}. Synthesizing a care plan is outside my domain.

# Fully out-of-scope: nothing here can be answered from the masks.
@kind full_oos
Q: What is the molecular subtype of {label}?
A: I cannot provide information about the molecular subtype of {label}.
Q: How do genetic factors influence the development of {label}?
A: I cannot provide information regarding genetic factors in the development of {label}.
Q: What medication should be prescribed for {label}?
A: Prescribing medication is outside my domain.
Q: What is the five-year survival rate for a patient with {label}?
A: I am unable to estimate survival for {label}.
Q: Is {label} likely to cause seizures?
A: I cannot predict clinical symptoms such as seizures from {label}.
Q: How does the perfusion of {label} compare with normal tissue?
A: Perfusion information about {label} is not available to me.
Q: Which clinical trial would suit a patient with {label}?
A: Recommending clinical trials is beyond my capabilities.
Q: What was the patient's age when {label} was first detected?
A: I do not have access to patient history, so I cannot answer that.
)BANK";

}  // namespace

std::string_view canonical_bank_text() { return kBank; }

}  // namespace mpvqa
